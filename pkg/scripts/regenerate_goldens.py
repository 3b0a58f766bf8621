"""Rebuild tests/golden/<name>/ from every config in configs/.

Only the CSVs are kept; the manifest carries wall-clock timings and is not
byte-stable.  Run after a deliberate numerical change and review the diff.
"""
import argparse
import shutil
import tempfile
from pathlib import Path

from tclgen.config import load_config
from tclgen.runner import execute

ROOT = Path(__file__).resolve().parent.parent


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--configs", type=Path, default=ROOT / "configs")
    p.add_argument("--golden", type=Path, default=ROOT / "tests" / "golden")
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()
    for cfg_path in sorted(args.configs.glob("*.yaml")):
        dest = args.golden / cfg_path.stem
        with tempfile.TemporaryDirectory() as tmp:
            execute(load_config(cfg_path), tmp, threads=args.threads)
            if dest.exists():
                shutil.rmtree(dest)
            dest.mkdir(parents=True)
            for csv in sorted(Path(tmp).glob("*.csv")):
                shutil.copy(csv, dest / csv.name)
        print(f"{cfg_path.name}: {', '.join(sorted(f.name for f in dest.iterdir()))}")


if __name__ == "__main__":
    main()
