"""Weighted covariance sum of tanh against its uniqueness bound on a 1-d torus."""
import argparse
import json

from latgibbs.analysis import check_decay_bound, displacement_ball, estimate_covariances, observable
from latgibbs.lattice import Semimetric, build_lattice, uniqueness_threshold
from latgibbs.potentials import build_model1
from latgibbs.sampler import run_chain


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L", type=int, default=64)
    ap.add_argument("--lam", type=float, default=0.02)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--sweeps", type=int, default=50_000)
    ap.add_argument("--radius", type=int, default=8)
    ap.add_argument("--seed", type=int, default=8)
    args = ap.parse_args(argv)

    m = build_model1(1, {(1,): 1.0}, args.lam)
    metric = Semimetric(args.alpha)
    dob = uniqueness_threshold(m, metric)
    print("lambda * gamma_alpha = %.4f" % dob.lam_gamma)
    if not dob.unique:
        raise SystemExit("outside the uniqueness regime")
    lat = build_lattice(1, [args.L], "torus")
    fields = run_chain(m, lat, args.sweeps, burnin=args.sweeps // 25, seed=args.seed).fields
    t = observable("tanh")
    s = estimate_covariances(fields, lat, t, t, displacement_ball(1, args.radius))
    rep = check_decay_bound(s, m, metric, t, t)
    print(rep.line())
    print(json.dumps(rep.to_json(), indent=2))


if __name__ == "__main__":
    main()
