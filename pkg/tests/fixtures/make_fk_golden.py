"""Regenerate fk_golden.yaml from an independent chain composition.

Uses scipy rotation vectors and homogeneous 4x4 transforms, not the
package's own Rodrigues code, so the fixture is an external oracle.
Run: python3 tests/fixtures/make_fk_golden.py
"""

from pathlib import Path

import numpy as np
import yaml
from scipy.spatial.transform import Rotation

HERE = Path(__file__).parent
ARM = HERE.parents[1] / "src" / "mobicatch" / "data" / "arm_xarm6.yaml"


def transform(rot=np.eye(3), trans=(0.0, 0.0, 0.0)):
    t = np.eye(4)
    t[:3, :3] = rot
    t[:3, 3] = trans
    return t


def oracle_fk(arm: dict, q) -> np.ndarray:
    t = np.eye(4)
    for joint, angle in zip(arm["joints"], q):
        t = t @ transform(trans=joint["offset"])
        t = t @ transform(Rotation.from_rotvec(np.asarray(joint["axis"], float) * angle).as_matrix())
    t = t @ transform(trans=arm["palm_offset"])
    t = t @ transform(Rotation.from_euler("xyz", arm["palm_rpy"]).as_matrix())
    return t


def main():
    arm = yaml.safe_load(ARM.read_text())
    lo = np.array([j["limits"][0] for j in arm["joints"]])
    hi = np.array([j["limits"][1] for j in arm["joints"]])
    rng = np.random.default_rng(20240601)
    configs = [("home", 0.5 * (lo + hi)), ("zeros", np.zeros(6)), ("lower", lo), ("upper", hi)]
    configs += [(f"random_{i}", rng.uniform(lo, hi)) for i in range(8)]
    cases = []
    for name, q in configs:
        t = oracle_fk(arm, q)
        cases.append({"name": name, "q": [float(x) for x in q],
                      "position": [float(x) for x in t[:3, 3]],
                      "rotation": [[float(x) for x in row] for row in t[:3, :3]]})
    out = {"format_version": 1, "arm": arm["name"], "cases": cases}
    (HERE / "fk_golden.yaml").write_text(yaml.safe_dump(out, sort_keys=False))


if __name__ == "__main__":
    main()
