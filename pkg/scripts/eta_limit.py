"""Approach of eta12 to its far-field value -2/d^3 and agreement with quadrature."""

import argparse

import numpy as np

from gravchannel.eta import eta_closed, eta_quadrature


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--R0", type=float, default=1.0)
    parser.add_argument("--d", type=float, nargs="+", default=list(np.geomspace(1e-3, 30, 12)))
    args = parser.parse_args()

    print("d_over_R0,eta12,eta12_over_eta,minus_eta12_d3_over_2,quadrature_rel_diff")
    for d in args.d:
        e = eta_closed(args.R0, d)
        q = eta_quadrature(args.R0, d)
        rel = abs(q.eta12 - e.eta12) / e.eta
        print(f"{d / args.R0:.6g},{e.eta12:.12g},{e.eta12 / e.eta:.12g},{-e.eta12 * d**3 / 2:.12g},{rel:.2e}")


if __name__ == "__main__":
    main()
