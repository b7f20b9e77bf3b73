"""Defense and imperceptibility metrics, plus the robustness transform battery.

Conventions, which are recorded in every report:

* Output distances are measured after rescaling the model's output range to
  unit width. A defense succeeds when the mean squared output difference is
  strictly greater than ``DSR_THRESHOLD``.
* The low-frequency distortion is the sum of squared differences between
  low-pass reconstructions on a 0-255 pixel scale, averaged over images.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .errors import InvalidInput, ShapeError
from .filters import box_window, filter_reflect, gaussian_window
from .image import ImageTensor, require_even
from .losses import SsimConfig, ssim_value
from .wavelet import low_pass

DSR_THRESHOLD = 0.05
PIXEL_SCALE_NOTE = (
    "l2_out/l1_out: output range rescaled to unit width, success iff l2_out > 0.05; "
    "lf_in: sum of squared low-pass differences on a 0-255 scale"
)


def _check(a: ImageTensor, b: ImageTensor):
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def l2_output_distance(y: ImageTensor, y_adv: ImageTensor) -> float:
    """Mean squared difference on a unit-width scale (``y``'s declared range)."""
    _check(y, y_adv)
    d = (y.data - y_adv.data) / y.range_width
    return float(np.mean(d * d))


def l1_output_distance(y: ImageTensor, y_adv: ImageTensor) -> float:
    _check(y, y_adv)
    return float(np.mean(np.abs(y.data - y_adv.data)) / y.range_width)


def defense_success(l2: float) -> bool:
    return l2 > DSR_THRESHOLD


def dsr(outputs) -> float:
    """Fraction of ``(y, y_adv)`` pairs whose L2 output distance exceeds the threshold."""
    outputs = list(outputs)
    if not outputs:
        raise InvalidInput("dsr of an empty list")
    hits = sum(defense_success(l2_output_distance(y, ya)) for y, ya in outputs)
    return hits / len(outputs)


def psnr(x: ImageTensor, x_adv: ImageTensor) -> float:
    """PSNR in dB against ``x``'s range width; ``math.inf`` for identical images."""
    _check(x, x_adv)
    mse = float(np.mean((x.data - x_adv.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(x.range_width ** 2 / mse)


def ssim_metric(x: ImageTensor, x_adv: ImageTensor) -> float:
    # shrink the window for images smaller than 11 pixels on a side
    side = min(x.height, x.width)
    size = min(11, side if side % 2 else side - 1)
    return ssim_value(x, x_adv, SsimConfig(window_size=size, data_range=x.range_width))


def lf_distance(x: ImageTensor, x_adv: ImageTensor) -> float:
    _check(x, x_adv)
    require_even(x)
    d = (low_pass(x.data) - low_pass(x_adv.data)) * (255.0 / x.range_width)
    return float(np.sum(d * d))


def lf_metric(pairs) -> float:
    pairs = list(pairs)
    if not pairs:
        raise InvalidInput("lf_metric of an empty list")
    return sum(lf_distance(x, xa) for x, xa in pairs) / len(pairs)


# -- robustness transforms ----------------------------------------------------

@dataclass(frozen=True)
class Transform:
    """``kind`` is ``gaussian_blur``, ``average_blur`` or ``rotate``; ``param``
    is the kernel size or the angle in degrees (counter-clockwise)."""

    kind: str
    param: float

    @property
    def label(self) -> str:
        p = int(self.param) if float(self.param).is_integer() else self.param
        return f"{self.kind}:{p}"

    @classmethod
    def parse(cls, text: str) -> Transform:
        kind, _, param = text.partition(":")
        kind = {"gaussian": "gaussian_blur", "average": "average_blur", "rotation": "rotate"}.get(kind, kind)
        if kind not in ("gaussian_blur", "average_blur", "rotate") or not param:
            raise InvalidInput(f"bad transform {text!r}; expected e.g. gaussian_blur:3 or rotate:45")
        return cls(kind, float(param))


STANDARD_BATTERY = tuple(
    [Transform("gaussian_blur", k) for k in (1, 3, 5, 7)]
    + [Transform("average_blur", k) for k in (1, 3, 5, 7)]
    + [Transform("rotate", a) for a in (45, 90, 135, 180)]
)


def _odd_kernel(param) -> int:
    k = int(param)
    if k != param or k < 1 or k % 2 == 0:
        raise InvalidInput(f"blur kernel must be an odd positive integer, got {param}")
    return k


def rotate(x: ImageTensor, degrees: float) -> ImageTensor:
    """Rotate about the image centre; bilinear sampling, zero fill outside.

    Multiples of 90 degrees (180 for non-square images) are exact index
    permutations.
    """
    turns = degrees / 90.0
    if turns.is_integer():
        k = int(turns) % 4
        if k % 2 == 0 or x.height == x.width:
            return x.with_data(np.rot90(x.data, k, axes=(0, 1)))
    out = ndimage.rotate(x.data, degrees, axes=(1, 0), reshape=False, order=1,
                         mode="constant", cval=0.0, prefilter=False)
    return x.with_data(out)


def robustness_transform(x: ImageTensor, kind) -> ImageTensor:
    t = Transform.parse(kind) if isinstance(kind, str) else kind
    if t.kind == "gaussian_blur":
        k = _odd_kernel(t.param)
        return x if k == 1 else x.with_data(filter_reflect(x.data, gaussian_window(k, k / 6)))
    if t.kind == "average_blur":
        k = _odd_kernel(t.param)
        return x if k == 1 else x.with_data(filter_reflect(x.data, box_window(k)))
    if t.kind == "rotate":
        return x if t.param == 0 else rotate(x, t.param)
    raise InvalidInput(f"unknown transform kind {t.kind!r}")


# -- reports ------------------------------------------------------------------

@dataclass
class ImageRecord:
    index: int
    name: str
    l2_out: float
    l1_out: float
    psnr_in: float
    ssim_in: float
    lf_in: float | None
    defense_success: bool

    def to_json(self) -> dict:
        d = asdict(self)
        if math.isinf(self.psnr_in):
            d["psnr_in"] = "inf"
        return d


def _mean(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


@dataclass
class MetricsReport:
    records: list[ImageRecord]
    transform: str | None = None
    pixel_scale: str = PIXEL_SCALE_NOTE
    extra: dict = field(default_factory=dict)

    @property
    def n_images(self) -> int:
        return len(self.records)

    @property
    def dsr(self) -> float:
        if not self.records:
            raise InvalidInput("empty report")
        return sum(r.defense_success for r in self.records) / len(self.records)

    def aggregates(self) -> dict:
        psnrs = [r.psnr_in for r in self.records]
        mean_psnr = math.inf if any(math.isinf(p) for p in psnrs) and all(
            math.isinf(p) for p in psnrs) else _mean([p for p in psnrs if not math.isinf(p)])
        return {
            "n_images": self.n_images,
            "dsr": self.dsr,
            "l2_out": _mean(r.l2_out for r in self.records),
            "l1_out": _mean(r.l1_out for r in self.records),
            "psnr_in": mean_psnr,
            "psnr_inf_count": sum(math.isinf(p) for p in psnrs),
            "ssim_in": _mean(r.ssim_in for r in self.records),
            "lf_in": _mean(r.lf_in for r in self.records),
        }

    def summary_json(self) -> dict:
        agg = self.aggregates()
        if agg["psnr_in"] is not None and math.isinf(agg["psnr_in"]):
            agg["psnr_in"] = "inf"
        return {"transform": self.transform, "pixel_scale": self.pixel_scale, **agg, **self.extra}


def image_record(model, x: ImageTensor, x_adv: ImageTensor, index: int = 0, name: str = "",
                 y_clean: ImageTensor | None = None, x_seen: ImageTensor | None = None) -> ImageRecord:
    """Metrics for one pair. ``x_seen`` is what the model receives in place of
    ``x_adv`` (e.g. a transformed copy); input metrics always use ``x_adv``."""
    y = y_clean if y_clean is not None else model.forward(x)
    y_adv = model.forward(x_adv if x_seen is None else x_seen)
    l2 = l2_output_distance(y, y_adv)
    even = x.height % 2 == 0 and x.width % 2 == 0
    return ImageRecord(
        index=index,
        name=name,
        l2_out=l2,
        l1_out=l1_output_distance(y, y_adv),
        psnr_in=psnr(x, x_adv),
        ssim_in=ssim_metric(x, x_adv),
        lf_in=lf_distance(x, x_adv) if even else None,
        defense_success=defense_success(l2),
    )


def evaluate(model, pairs, names=None, transform=None) -> MetricsReport:
    """Metrics for ``(x, x_adv)`` pairs; with ``transform`` the model sees
    ``transform(x_adv)`` and its output is compared with ``M(x)``."""
    pairs = list(pairs)
    if not pairs:
        raise InvalidInput("nothing to evaluate")
    names = names or [f"image_{i}" for i in range(len(pairs))]
    t = Transform.parse(transform) if isinstance(transform, str) else transform
    records = []
    for i, ((x, xa), name) in enumerate(zip(pairs, names)):
        seen = robustness_transform(xa, t) if t is not None else None
        records.append(image_record(model, x, xa, i, name, x_seen=seen))
    return MetricsReport(records, transform=t.label if t is not None else None)


def evaluate_robustness(model, pairs, battery=STANDARD_BATTERY, names=None) -> dict[str, MetricsReport]:
    pairs = list(pairs)
    if not pairs:
        raise InvalidInput("nothing to evaluate")
    out = {}
    for t in battery:
        t = Transform.parse(t) if isinstance(t, str) else t
        out[t.label] = evaluate(model, pairs, names, transform=t)
    return out
