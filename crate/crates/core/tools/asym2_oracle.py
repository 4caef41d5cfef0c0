"""High-precision oracle for the asym2 fixture constants.

Independent of the Rust solver: 50-digit arithmetic, power iteration for the
Perron root and vectors, bisection on theta. Output is pasted into
fixtures/oracle_values.toml.
"""
import mpmath as mp

mp.mp.dps = 50

# (parent, child, poisson mean, exponential age rate)
CHANNELS = [
    (0, 0, mp.mpf("1.2"), mp.mpf(1)),
    (0, 1, mp.mpf("0.4"), mp.mpf(2)),
    (1, 0, mp.mpf("0.9"), mp.mpf(1)),
    (1, 1, mp.mpf("0.6"), mp.mpf("1.5")),
]


def kernel(theta):
    m = mp.matrix(2, 2)
    for s, r, mean, rate in CHANNELS:
        m[s, r] += mean * rate / (rate + theta)
    return m


def perron(m, left=False, iters=4000):
    v = mp.matrix([1, 1])
    lam = mp.mpf(0)
    for _ in range(iters):
        w = (m.T * v) if left else (m * v)
        lam = sum(w) / sum(v)
        v = w / sum(w)
    return lam, v


def radius(theta):
    return perron(kernel(theta))[0]


lo, hi = mp.mpf(0), mp.mpf(1)
while radius(hi) > 1:
    hi *= 2
for _ in range(200):
    mid = (lo + hi) / 2
    if radius(mid) > 1:
        lo = mid
    else:
        hi = mid
alpha = (lo + hi) / 2
m = kernel(alpha)
_, pi = perron(m, left=True)
_, h = perron(m)
pi = pi / sum(pi)
h = h / sum(pi[i] * h[i] for i in range(2))
beta = mp.mpf(0)
for s, r, mean, rate in CHANNELS:
    beta += pi[s] * h[r] * mean * rate / (rate + alpha) ** 2
nu = [pi[i] * h[i] for i in range(2)]
kern = [[h[r] * m[s, r] / h[s] for r in range(2)] for s in range(2)]

fmt = lambda x: mp.nstr(x, 20)
print("alpha =", fmt(alpha))
print("pi = [%s, %s]" % (fmt(pi[0]), fmt(pi[1])))
print("h = [%s, %s]" % (fmt(h[0]), fmt(h[1])))
print("beta =", fmt(beta))
print("nu = [%s, %s]" % (fmt(nu[0]), fmt(nu[1])))
print("spine_kernel = [[%s, %s], [%s, %s]]" % tuple(fmt(kern[s][r]) for s in range(2) for r in range(2)))
