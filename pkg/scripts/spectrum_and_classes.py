"""Spectrum, organization-center histogram and the anchor states.

    python3 scripts/spectrum_and_classes.py [--out DIR]
"""
import argparse
from pathlib import Path

from triplewell.classifier import classify_all, write_assignments_csv, write_summary_json
from triplewell.fock import ModelParams, solve, write_spectrum_csv

ANCHORS = (1, 2, 3, 4, 5, 9, 359, 401, 420, 433, 442, 461)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/classes")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    params = ModelParams()
    basis, es = solve(params)
    print(f"{len(es)} states, E in [{es.energies[0]:.4f}, {es.energies[-1]:.4f}]")
    assignments, summary = classify_all(es, basis, params=params)
    write_spectrum_csv(out / "spectrum.csv", es.energies)
    write_assignments_csv(out / "assignments.csv", assignments)
    write_summary_json(out / "summary.json", summary)
    print("counts:", {k: summary[k] for k in ("E1", "C", "B", "D", "A", "UNASSIGNED")},
          "assigned", summary["total_assigned"])
    for a in assignments:
        if a.state_index in ANCHORS:
            print(f"  {a.state_index:4d}  E={a.energy:8.4f}  {a.center.value:>2} {a.quantum_numbers}"
                  f"  conf={a.confidence:.2f}")


if __name__ == "__main__":
    main()
