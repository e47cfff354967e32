"""Plain versus bumped two-weight constants on a pair of separated indicators.

The log bumps make every constant larger; the printout shows by how much the
right, left and conjoined placements inflate [u,σ] for u=χ[0,1], σ=χ[2,3].
"""
from dyadic_weights.constants import bump_constant, two_weight_apq
from dyadic_weights.mesh import MeshFunction, WeightPair
from dyadic_weights.orlicz import log_bump

K, L = 3, 4
p, q, alpha = 2.0, 3.0, 0.5
pp, qq = p / (p - 1), q / (q - 1)
pair = WeightPair(MeshFunction.indicator([(0, 1)], K, L), MeshFunction.indicator([(2, 3)], K, L))
plain = two_weight_apq(pair, p, q, alpha).value
A, B = log_bump(q, 1.0), log_bump(pp, 1.0)
print(f"[u,sigma] = {plain:.5f}")
for placement in ("right", "left", "conjoined"):
    r = bump_constant(pair, p, q, alpha, A=A, B=B, placement=placement)
    print(f"{placement:>9}: {r.value:.5f}  ratio {r.value / plain:.4f}  witness {r.witness}")
