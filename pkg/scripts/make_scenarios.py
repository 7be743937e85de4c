#!/usr/bin/env python3
"""Write the ready-made scenario files into scenarios/.

* desk_scale.json         two fractures, L-shaped well, noiseless
* desk_scale_noisy.json   same scene with target operator noise 0.05
* desk_scale_fluid.json   fluid-source / pore-pressure data only
* desk_scale_glsm.json    noisy scene inverted with the penalized indicator
"""

import argparse
import json
from pathlib import Path

from poroscat.presets import desk_scale_scenario


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="scenarios", help="output directory")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    variants = {
        "desk_scale.json": desk_scale_scenario(),
        "desk_scale_noisy.json": desk_scale_scenario(target_delta=0.05),
        "desk_scale_fluid.json": desk_scale_scenario(channels="fluid"),
        "desk_scale_glsm.json": desk_scale_scenario(method="glsm", target_delta=0.05),
    }
    for name, doc in variants.items():
        path = out / name
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
