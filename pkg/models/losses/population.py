import numpy as np

from datasets.base import Dataset
from models.kernels import KernelSpec, gram_matrix, paired_kernel
from models.losses.laplacian import RegularizerValue
from utils.exceptions import ValidationError

MAX_PAIRS = 1_000_000


def _evaluate(fn, X: np.ndarray) -> np.ndarray:
    if hasattr(fn, "predict"):
        return fn.predict(X)
    return np.asarray(fn(X), dtype=np.float64)


def population_kernel_regularizer(f, g, source: Dataset, target: Dataset, kernel: KernelSpec,
                                  max_pairs: int = MAX_PAIRS) -> RegularizerValue:
    """Monte Carlo estimate of E[1/2 (f(X_s) - g(X_t))^2 K(X_s, X_t)].

    Uses every source-target pair while n_s * n_t <= max_pairs. Past that the
    estimate pairs the i-th source row with the i-th target row, which keeps
    it unbiased at linear cost. ``f`` and ``g`` are models or oracle functions.
    """
    if source.n == 0 or target.n == 0:
        raise ValidationError("population regularizer needs nonempty source and target")
    fs = _evaluate(f, source.features)
    gt = _evaluate(g, target.features)

    if source.n * target.n <= max_pairs:
        K = gram_matrix(kernel, source.features, target.features)
        terms = 0.5 * (fs[:, None] - gt[None, :]) ** 2 * K
        value = float(terms.mean())
        # two-sample V-statistic, first-order (Hajek) variance
        row, col = terms.mean(axis=1), terms.mean(axis=0)
        var = (row.var(ddof=1) / source.n if source.n > 1 else 0.0) + (col.var(ddof=1) / target.n if target.n > 1 else 0.0)
        return RegularizerValue(value, standard_error=float(np.sqrt(var)), flags={"paired": False})

    m = min(source.n, target.n)
    K = paired_kernel(kernel, source.features[:m], target.features[:m])
    terms = 0.5 * (fs[:m] - gt[:m]) ** 2 * K
    se = float(terms.std(ddof=1) / np.sqrt(m)) if m > 1 else 0.0
    return RegularizerValue(float(terms.mean()), standard_error=se, flags={"paired": True})


def target_kernel_mass(source: Dataset, target: Dataset, kernel: KernelSpec) -> np.ndarray:
    """K_Q(x') = E_P K(X, x') estimated at every target row."""
    out = np.empty(target.n)
    block = max(1, MAX_PAIRS // max(source.n, 1))
    for start in range(0, target.n, block):
        stop = min(start + block, target.n)
        out[start:stop] = gram_matrix(kernel, source.features, target.features[start:stop]).mean(axis=0)
    return out


def population_constants(source: Dataset, target: Dataset, kernel: KernelSpec):
    """(mu_R, L_R) of the kernel regularizer: min target kernel mass and K_max."""
    mass = target_kernel_mass(source, target, kernel)
    return float(mass.min()), kernel.k_max


def second_derivative(h, source: Dataset, target: Dataset, kernel: KernelSpec) -> float:
    """Second Gateaux derivative of R(f, .) along h, i.e. E[h(X_t)^2 K(X_s, X_t)].

    The 1/2 inside R cancels the 2 from differentiating the square.
    """
    ht = _evaluate(h, target.features)
    return float(np.mean(ht * ht * target_kernel_mass(source, target, kernel)))
