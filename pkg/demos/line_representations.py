"""Walk through the line parameterizations on a pair of parallel lines."""

import numpy as np

from linemanifold.lines import (
    EndpointLine,
    RiemanTangent,
    count_parameters,
    group_from_members,
    group_retract,
    orthonormal_from_plucker,
    plucker_from_endpoints,
    rieman_from_plucker,
    rieman_retract,
)

np.set_printoptions(precision=4, suppress=True)

# two edges of a table top, both running along x
a = plucker_from_endpoints(EndpointLine(np.array([0.0, 1.0, 2.0]), np.array([3.0, 1.0, 2.0])))
b = plucker_from_endpoints(EndpointLine(np.array([0.0, -1.0, 2.0]), np.array([3.0, -1.0, 2.0])))
print("Plücker a: n =", a.n, " d =", a.d)

# orthonormal form: a rotation U and a 2x2 rotation W, 4 numbers of freedom
o = orthonormal_from_plucker(a)
print("U =\n", o.U, "\nW =\n", o.W)

# Riemannian form: unit direction u2, unit normal u1, distance omega
r = rieman_from_plucker(a)
print("u2 =", r.u2, " u1 =", r.u1, " omega =", r.omega)

# a small tangent step moves the direction and spins the normal around it
step = rieman_retract(r, RiemanTangent(np.array([0.05, 0.0]), 0.1, np.log(1.5)))
print("after a step: u2 =", step.u2, " omega =", round(step.omega, 4))

# grouped, the two lines share one direction; updates keep it shared
g = group_from_members([rieman_from_plucker(a), rieman_from_plucker(b)])
g = group_retract(g, [0.02, -0.01], [(0.1, 0.0), (-0.05, 0.2)])
print("shared direction:", g.u2, " members bitwise parallel:",
      np.array_equal(g.member(0).u2, g.member(1).u2))

# parameter count for 6 parallel lines
for n in (2, 6):
    print(f"{n} parallel lines: grouped {count_parameters(0, 0, group_sizes=[n])[1]} parameters,",
          f"orthonormal {count_parameters(0, 0, group_sizes=[n], mode='orthonormal')[1]}")
