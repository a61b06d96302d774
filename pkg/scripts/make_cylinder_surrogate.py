"""Write a 3-D mean-field wake time series as a plain trajectory CSV.

Stand-in for POD/shift-mode coefficients of the Re=100 cylinder wake: a
trajectory of the Noack et al. (2003) mean-field model started near the
unstable fixed point, so it spirals out along the paraboloid onto the
limit cycle. Feed the CSV to ``rkdenoise corrupt --as-observations`` or
to a config via ``input:``.
"""
import argparse

import numpy as np

from rkdenoise.integrate import rk4_simulate
from rkdenoise.serialize import write_trajectory


def mean_field(mu=0.1, omega=1.0, a=-0.1, lam=10.0):
    def f(x):
        x1, x2, x3 = x
        return np.array([mu * x1 - omega * x2 + a * x1 * x3,
                         omega * x1 + mu * x2 + a * x2 * x3,
                         -lam * (x3 - x1**2 - x2**2)])
    return f


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("-o", "--output", default="data/cylinder_mean_field.csv")
    p.add_argument("--t1", type=float, default=60.0)
    p.add_argument("--m", type=int, default=2400)
    p.add_argument("--x0", type=float, nargs=3, default=(0.1, 0.0, 0.01))
    args = p.parse_args(argv)
    traj = rk4_simulate(mean_field(), args.x0, np.linspace(0.0, args.t1, args.m))
    write_trajectory(args.output, traj)
    print(args.output)


if __name__ == "__main__":
    main()
