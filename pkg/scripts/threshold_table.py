"""Uniqueness thresholds of the sextic model: numeric gamma_d against the explicit sufficient constant."""
import argparse

from latgibbs.lattice import Semimetric, model1_threshold, uniqueness_threshold
from latgibbs.potentials import build_model1


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[1, 2, 3, 4])
    ap.add_argument("--alpha", type=float, nargs="+", default=[0.0, 0.5])
    ap.add_argument("--dim", type=int, default=1)
    args = ap.parse_args(argv)

    b = {tuple(int(i == a) for i in range(args.dim)): 1.0 for a in range(args.dim)}
    print("%3s %6s %12s %12s %12s %10s" % ("n", "alpha", "gamma_d", "threshold", "explicit", "tol"))
    for n in args.n:
        m = build_model1(n, b, 0.0)
        for alpha in args.alpha:
            metric = Semimetric(alpha)
            rep = uniqueness_threshold(m, metric)
            explicit = model1_threshold(n, b, metric)
            print("%3d %6.2f %12.6f %12.6f %12.6f %10.2e"
                  % (n, alpha, rep.gamma_d, rep.threshold, explicit, rep.tolerance))


if __name__ == "__main__":
    main()
