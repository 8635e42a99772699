"""Positive-transfer experiment on the oval: FAST with an oval_alt source vs baseline SAC.

    python scripts/transfer_experiment.py --out results/transfer [--seeds 0 1 2 3 4]
"""
import argparse
import json
import logging
from pathlib import Path

from fast_transfer.embed.autoencoder import save_autoencoder
from fast_transfer.evaluation import export_curves, plot_curves
from fast_transfer.experiments import build_ae_corpus, train_desk_autoencoder, transfer_speedup


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results/transfer")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--baseline-steps", type=int, default=200_000)
    p.add_argument("--fast-steps", type=int, default=100_000)
    p.add_argument("--source-steps", type=int, default=200_000)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    ae, curves = train_desk_autoencoder(build_ae_corpus())
    save_autoencoder(ae, out / "autoencoder.ckpt", {"val_mse": curves["val_mse"]})
    logging.info("autoencoder val %.4g test %.4g", curves["val_mse"], curves["test_mse"])

    res = transfer_speedup(ae, seeds=tuple(args.seeds), baseline_steps=args.baseline_steps,
                           fast_steps=args.fast_steps, source_steps=args.source_steps)
    plots = {}
    for kind in ("baselines", "fast"):
        for run in res[kind]:
            label = f"{kind}_{run['seed']}"
            export_curves(run["curve"], out / f"{label}.csv", window=10)
            plots[label] = run.pop("curve")
    plot_curves(plots, out / "curves.png", window=10)
    (out / "summary.json").write_text(json.dumps(res, indent=1, default=str))
    print(json.dumps({k: res[k] for k in ("threshold", "median_crossing", "fraction_of_baseline", "min_usage")}))


if __name__ == "__main__":
    main()
