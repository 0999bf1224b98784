"""Sample the Gaussian chain on a 1-d torus and compare covariances with the exact inverse."""
import argparse

import numpy as np

from latgibbs.analysis import (CovarianceSeries, displacement_ball, estimate_covariances,
                               fit_decay_rate, observable)
from latgibbs.lattice import build_lattice, gaussian_covariance_oracle, oracle_series
from latgibbs.potentials import build_gaussian
from latgibbs.sampler import run_chain


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L", type=int, default=16)
    ap.add_argument("--epsilon", type=float, default=1.0)
    ap.add_argument("--lam", type=float, default=0.1)
    ap.add_argument("--sweeps", type=int, default=20_000)
    ap.add_argument("--radius", type=int, default=4)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args(argv)

    m = build_gaussian(args.epsilon, {(1,): 1.0}, args.lam)
    lat = build_lattice(1, [args.L], "torus")
    fields = run_chain(m, lat, args.sweeps, burnin=args.sweeps // 10, seed=args.seed).fields
    x = observable("x")
    disps = displacement_ball(1, args.radius)
    s = estimate_covariances(fields, lat, x, x, disps)
    exact = oracle_series(gaussian_covariance_oracle(m, lat), lat, disps)

    print("%5s %12s %12s %10s %7s" % ("k", "sampled", "oracle", "stderr", "z"))
    for k, c, e, se in zip(disps, s.cov, exact, s.stderr):
        print("%5d %12.6f %12.6f %10.2e %7.2f" % (k[0], c, e, se, (c - e) / se))
    fit = fit_decay_rate(s)
    ofit = fit_decay_rate(CovarianceSeries.exact(disps, exact), max_norm=args.radius)
    print("decay rate: sampled %.4f, oracle %.4f" % (fit.rate, ofit.rate))
    print("max |z| = %.2f" % np.max(np.abs((s.cov - exact) / s.stderr)))


if __name__ == "__main__":
    main()
