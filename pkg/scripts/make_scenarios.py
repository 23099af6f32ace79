"""Write the bundled synthetic scenarios as JSON config files."""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from pcfm.scenarios import flat_single, uwb15, wideband

SCENARIOS = {
    "uwb15": lambda: uwb15(),
    "uwb15_lumped": lambda: uwb15(lumped_loss=True),
    "wideband150": lambda: wideband(),
    "constant": lambda: flat_single(loss_dB_per_km=0.0),
    "flat_single": lambda: flat_single(),
}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="scenarios", help="output directory")
    args = parser.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, build in SCENARIOS.items():
        path = out / f"{name}.json"
        path.write_text(json.dumps(build(), indent=2) + "\n")
        print(path)


if __name__ == "__main__":
    main()
