"""
Telling benign optima from degenerate ones
==========================================

The rank test assembles the constraint gradients restricted to the tangent
space of the optimal face.  Full row rank there means the optimum is
nondegenerate; a rank drop flags trouble even when the solver converged.
The terminal Newton matrix gives an independent second opinion.
"""

import numpy as np

from spectraproj import (
    gen_elliptope,
    gen_vontope,
    is_nondegenerate,
    jacobian_degeneracy_crosscheck,
    newton_solve,
    smat,
)

# unit-diagonal instances are the friendly case: the optimum sits on a
# well-behaved face and both tests come back clean
inst = gen_elliptope(8, seed=1)
trace = newton_solve(inst)
report = is_nondegenerate(inst, trace.triple.X, trace.triple.Z)
print("unit-diagonal instance")
print("  verdict              ", report.verdict)
print("  rank of gradients     %d of %d rows" % (report.rank_L, report.m))
print("  margin               ", "%.2e" % report.margin)
print("  strict complementarity", report.strict_complementarity)

cc = jacobian_degeneracy_crosscheck(inst, trace)
print("  terminal matrix nonsingular:", cc.jacobian_nonsingular,
      " agree:", cc.agree)

# at a vertex of the lifted permutation body the story changes: the solver
# grinds to a conditioning stop and the rank test, pointed at the known
# vertex, reports a degenerate optimum
hard = gen_vontope(3, seed=0, post_fr=True, w_mode="rank1")
hard_trace = newton_solve(hard)
vertex = smat(np.asarray(hard.meta["planted"]["vertex"]))
cc2 = jacobian_degeneracy_crosscheck(hard, hard_trace, X=vertex)
print()
print("lifted permutation vertex")
print("  solver status        ", hard_trace.status.value)
print("  terminal cond         %.2e" % hard_trace.cond_final)
print("  verdict              ", cc2.report.verdict)
print("  tests agree          ", cc2.agree)
