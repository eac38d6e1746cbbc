"""Dissipative-KTM asymptotic energy over alpha: closed form against the Lyapunov steady state."""

import argparse

import numpy as np

from gravchannel.analytics import ktm_asymptotic_energy
from gravchannel.errors import NotDissipative
from gravchannel.gaussian import steady_state
from gravchannel.model import KtmParams, build_generator


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--K", type=float, default=0.3)
    parser.add_argument("--m", type=float, default=1.0)
    parser.add_argument("--omega", type=float, default=1.0)
    parser.add_argument("--alphas", type=float, nargs="+", default=list(np.geomspace(1e-3, 0.5, 10)))
    args = parser.parse_args()

    print("alpha,closed_form,lyapunov,small_alpha,relative_deviation")
    for a in args.alphas:
        p = KtmParams.from_coupling(args.K, m=args.m, omega=args.omega, minimized_gamma=True, alpha1=a, alpha2=a)
        closed = ktm_asymptotic_energy(p)
        small = ktm_asymptotic_energy(p, limit="small_alpha")
        try:
            _, lyap = steady_state(build_generator(p))
        except NotDissipative:
            lyap = float("nan")
        print(f"{a:.6g},{closed:.12g},{lyap:.12g},{small:.12g},{abs(lyap - closed) / closed:.2e}")


if __name__ == "__main__":
    main()
