"""Compare the KTM heating slope from the moment and dense engines with hbar K / m."""

import argparse

import numpy as np

from gravchannel.analytics import ktm_growth_rate
from gravchannel.gaussian import energy, integrate_moments, vacuum_state
from gravchannel.hilbert import DenseState, coherent_ket, compile_model, dense_energy, dense_integrate
from gravchannel.model import KtmParams, build_generator


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--K", type=float, default=0.05)
    parser.add_argument("--t-max", type=float, default=4.0)
    parser.add_argument("--ncut", type=int, default=12)
    parser.add_argument("--dt", type=float, default=0.02)
    args = parser.parse_args()

    p = KtmParams.from_coupling(args.K, minimized_gamma=True)
    t = np.linspace(0.0, args.t_max, 9)
    gen = build_generator(p)
    E_mom = [energy(s, gen.ham) for s in integrate_moments(gen, vacuum_state([1, 1], [1, 1]), t)]
    cm = compile_model(p, args.ncut)
    rho0 = DenseState.from_ket(coherent_ket(args.ncut, [0, 0]), args.ncut)
    E_dense = [dense_energy(s, cm) for s in dense_integrate(cm, rho0, t, dt=args.dt)]
    rate = ktm_growth_rate(p)
    print("t,E_moments,E_dense")
    for row in zip(t, E_mom, E_dense):
        print(",".join(f"{v:.12g}" for v in row))
    for name, E in (("moments", E_mom), ("dense", E_dense)):
        slope = np.polyfit(t, E, 1)[0]
        print(f"# {name}: slope {slope:.12g}, prediction {rate:.12g}, rel. dev {abs(slope - rate) / rate:.2e}")


if __name__ == "__main__":
    main()
