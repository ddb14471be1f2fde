"""Write exhaustive-oracle reference solutions for small subcarrier problems.

Twenty N=8, J=2 (QPSK, 16QAM) instances with exponential gains; both chains.
Output: tests/fixtures/bilevel_n8_j2.json

    python scripts/make_bilevel_fixtures.py [--seed 11] [--count 20]
"""

import argparse
from pathlib import Path

import numpy as np

from isaclab.constellations import qpsk, square_qam
from isaclab.optimizer import InfeasibleProblemError, exhaustive_oracle
from isaclab.optimizer.instance import ProblemInstance, plan_to_dict, save_instances

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "bilevel_n8_j2.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    classes = [qpsk(), square_qam(16)]
    instances, solutions = [], []
    while len(instances) < args.count:
        chain = ("MF", "RF")[len(instances) % 2]
        inst = ProblemInstance(chain, classes, np.round(30 * rng.exponential(size=8), 6),
                               float(np.round(rng.uniform(2.2, 3.8), 4)), 6.0, m=16)
        try:
            plan = exhaustive_oracle(inst.chain, inst.channel_gains, inst.classes, inst.r_min,
                                     inst.p_ave, **inst.kwargs())
        except InfeasibleProblemError:
            continue
        instances.append(inst)
        solutions.append(plan_to_dict(plan))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_instances(args.out, instances, solutions)
    print(f"wrote {len(instances)} instances to {args.out}")


if __name__ == "__main__":
    main()
