"""Independent high-precision oracle for the constants frozen into the C++ tests.

Run: python3 tests/oracle/derive_reference_values.py
Uses mpmath only; shares no code with the engine.
"""
from mpmath import mp, mpf, log, sqrt, exp, pi, e, quad, inf

mp.dps = 40


def show(name, value):
    print(f"{name:40s} {mp.nstr(value, 20)}")


# Two-state {0,1}, A = 0.7.
A = mpf(7) / 10
show("two_state.lambda", -log(A / (1 - A)))
show("two_state.entropy", -A * log(A) - (1 - A) * log(1 - A))
show("two_state.log_partition", log(1 / (1 - A)))
show("two_state.fisher_A", 1 / (A * (1 - A)))

# Three-state {0,1,2}, A = 1.5: (q + 2 q^2) / (1 + q + q^2) = 3/2 with
# q = e^-lambda, i.e. q^2 - q - 3 = 0.
q = (1 + sqrt(13)) / 2
Z = 1 + q + q * q
show("three_state.exp_neg_lambda", q)
show("three_state.lambda", -log(q))
for k, p in enumerate([1 / Z, q / Z, q * q / Z]):
    show(f"three_state.p{k}", p)
show("three_state.entropy", log(Z) - log(q) * mpf(3) / 2)

# Bernoulli entropic prior: zeta = int e^{S(A)} g^{1/2}(A) dA, g = 1/(A(1-A)).
def integrand(a):
    return exp(-a * log(a) - (1 - a) * log(1 - a)) / sqrt(a * (1 - a))


show("bernoulli.zeta_full", quad(integrand, [0, mpf(1) / 2, 1]))
for off in (mpf("1e-2"), mpf("1e-3"), mpf("5e-4")):
    show(f"bernoulli.zeta_truncated[{off}]", quad(integrand, [off, mpf(1) / 2, 1 - off]))
z1 = quad(integrand, [mpf("1e-3"), mpf(1) / 2, 1 - mpf("1e-3")])
z2 = quad(integrand, [mpf("5e-4"), mpf(1) / 2, 1 - mpf("5e-4")])
show("bernoulli.offset_halving_change", (z2 - z1) / z1)
eps = mpf("1e-3")
show("bernoulli.offset_halving_estimate", 4 * sqrt(eps) * (1 - 1 / sqrt(2)) / z1)

# Gaussian family: S(sigma) = log(sigma sqrt(2 pi e)), g = diag(1, 2)/sigma^2,
# so e^S g^{1/2} sigma = sqrt(4 pi e).
show("gaussian.entropy_sigma1", log(sqrt(2 * pi * e)))
show("gaussian.constant", sqrt(4 * pi * e))

# Bayes update of the alpha=1 Bernoulli prior with 60 ones and 40 zeros on the
# 1001-node grid with offset 1e-3: mode of the posterior density.
n = 1001
lo, hi = mpf("1e-3"), 1 - mpf("1e-3")
best, arg = None, None
for k in range(n):
    a = lo + (hi - lo) * k / (n - 1)
    v = -a * log(a) - (1 - a) * log(1 - a) - log(a * (1 - a)) / 2 + 60 * log(a) + 40 * log(1 - a)
    if best is None or v > best:
        best, arg = v, k
print(f"{'bayes_60_40.mode_index':40s} {arg}")
show("bayes_60_40.mode", lo + (hi - lo) * arg / (n - 1))

# Binomial units: canonical multiplier of system N + bath N' at total A_T
# (joint two-state units): lambda = -log(f / (1 - f)), f = A_T / (N + N').
show("bath.lambda_eq_f0.4", -log(mpf("0.4") / mpf("0.6")))
