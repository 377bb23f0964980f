"""Walkthrough: the command-line pipeline, stage by stage.

Writes a small config, then runs plan -> solve -> compile ->
evaluate -> sweep through the same entry point the `hermnet` console
script uses, and prints the artifacts each stage leaves behind.

Runs in under a minute inside a temporary directory.
"""

import json
import tempfile
from pathlib import Path

from hermnet.cli import main


def run(*argv):
    code = main([str(a) for a in argv])
    assert code == 0, f"stage failed with exit code {code}"


def demo():
    root = Path(tempfile.mkdtemp(prefix="hermnet_demo_"))
    out = root / "run"
    cfg = {
        "problem": {"mesh_n": 16,
                    "psi": {"family": "sine", "c": 0.4, "alpha": 2.0}},
        "weights": {"q": 2.0 / 3.0, "tail": [2.0, 2.0]},
        "xi_sweep": [2.0, 4.0, 8.0],
        "delta_mode": 1e-5,
        "omega_mode": 2.0,
        "mc": {"n_samples": 32, "seed": 11, "tail_dims": 2},
        "output": str(out),
    }
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(cfg, indent=1), encoding="utf-8")
    print(f"config: {cfg_path}")

    for stage in ("plan", "solve", "compile"):
        print(f"\n$ hermnet {stage} --config config.json")
        run(stage, "--config", cfg_path)
    print("\n$ hermnet evaluate --config config.json --mode network --index 2")
    run("evaluate", "--config", cfg_path, "--mode", "network", "--index", "2")
    print("\n$ hermnet sweep --config config.json")
    run("sweep", "--config", cfg_path)

    print("\nartifacts:")
    for path in sorted(out.iterdir()):
        print(f"  {path.name:24s} {path.stat().st_size:8d} bytes")

    print("\nresults.csv:")
    print((out / "results.csv").read_text(encoding="utf-8"))
    fits = json.loads((out / "fits.json").read_text(encoding="utf-8"))
    for key in ("l2_vs_points", "l2_vs_size"):
        fit = fits[key]
        print(f"{key}: slope={fit['slope']:.3f} r2={fit['r_squared']:.4f}")


if __name__ == "__main__":
    demo()
