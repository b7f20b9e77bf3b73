"""Shared golden-run setup: conv surrogate seed 42, 16 seeded 64x64 images, default hyperparameters.

``python tests/golden.py --write`` regenerates ``golden/golden_run.json``;
only do that after the acceptance checks pass on the new numbers.
"""
import hashlib
import json
import sys
import time
from pathlib import Path

from grasp.engine import ABLATION_ROWS, DefenseConfig, generate_adversarial
from grasp.metrics import evaluate
from grasp.models import ConvSurrogate
from grasp.suite import seeded_suite

SNAPSHOT = Path(__file__).parent / "golden" / "golden_run.json"
METRIC_FIELDS = ("l2_out", "l1_out", "psnr_in", "ssim_in", "lf_in")


def golden_model():
    return ConvSurrogate(seed=42)


def golden_images():
    return seeded_suite(n=16, size=64, seed=0)


def run_row(row="full", model=None, images=None):
    """Defend every golden image with one ablation row; returns a dict of results."""
    model = model or golden_model()
    images = images if images is not None else golden_images()
    cfg = DefenseConfig(ablation=ABLATION_ROWS[row])
    start = time.perf_counter()
    outs = [generate_adversarial(model, x, cfg) for x in images]
    elapsed = time.perf_counter() - start
    pairs = [(x, xa) for x, (xa, _) in zip(images, outs)]
    return {
        "row": row,
        "seconds": elapsed,
        "pairs": pairs,
        "traces": [t for _, t in outs],
        "report": evaluate(model, pairs),
    }


def metric_vector(result) -> dict:
    recs = result["report"].records
    digest = hashlib.sha256(b"".join(xa.data.tobytes() for _, xa in result["pairs"])).hexdigest()
    return {
        **{f: [float(getattr(r, f)).hex() for r in recs] for f in METRIC_FIELDS},
        "dsr": result["report"].dsr,
        "x_adv_sha256": digest,
    }


if __name__ == "__main__":
    if "--write" not in sys.argv:
        sys.exit("pass --write to overwrite the snapshot")
    res = run_row("full")
    SNAPSHOT.write_text(json.dumps(metric_vector(res), indent=1, sort_keys=True) + "\n")
    print(f"wrote {SNAPSHOT} in {res['seconds']:.1f}s, dsr={res['report'].dsr}")
