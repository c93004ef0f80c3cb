"""Functionals of local times, summability checks and limit series.

Every functional maps a visit count j >= 0 to a real number and is 0 at 0.
Families carry a growth envelope ``|f(j)| <= C * j**alpha * rho**j`` (or a
finite support bound) that is used both to decide the summability
conditions analytically and to bound truncation error of the limit series.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

FAMILIES = ("range", "level", "power", "hshift", "geomhalf", "table", "truncated")


class ConditionError(ValueError):
    """A limit was requested for a functional that fails the summability condition."""


@dataclass(frozen=True)
class LocalFunctional:
    family: str
    param: float | int | None = None
    values: tuple[float, ...] = ()
    inner: "LocalFunctional | None" = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown functional family {self.family!r}")
        if self.family in ("level", "hshift") and (not isinstance(self.param, int) or self.param < 1):
            raise ValueError(f"{self.family} needs an integer parameter >= 1, got {self.param!r}")
        if self.family == "truncated":
            if self.inner is None or not isinstance(self.param, int) or self.param < 1:
                raise ValueError("truncated needs an inner functional and p >= 1")
        if self.family == "geomhalf" and self.param is not None and not 0 < self.param < 1:
            raise ValueError(f"geomhalf needs gamma in (0, 1), got {self.param!r}")
        if self.family == "power" and (self.param is None or not math.isfinite(self.param)):
            raise ValueError("power needs a finite exponent")

    # -- evaluation -----------------------------------------------------------------------

    def evaluate(self, j: int) -> float:
        if j < 0:
            raise ValueError("local times are nonnegative")
        if j == 0:
            return 0.0
        fam = self.family
        if fam == "range":
            return 1.0
        if fam == "level":
            return 1.0 if j == self.param else 0.0
        if fam == "power":
            return float(j) ** self.param
        if fam == "hshift":
            return float(max(j + 1 - self.param, 0))
        if fam == "geomhalf":
            if self.param is None:
                raise ValueError("geomhalf is unresolved; call resolve(gamma) first")
            return (1.0 - self.param) ** (-j / 2.0)
        if fam == "table":
            return float(self.values[j - 1]) if j <= len(self.values) else 0.0
        return self.inner.evaluate(j) if j <= self.param else 0.0

    def __call__(self, j: int) -> float:
        return self.evaluate(j)

    @property
    def is_integer_valued(self) -> bool:
        fam = self.family
        if fam in ("range", "level", "hshift"):
            return True
        if fam == "power":
            return float(self.param).is_integer() and self.param >= 0
        if fam == "table":
            return all(float(v).is_integer() for v in self.values)
        if fam == "truncated":
            return self.inner.is_integer_valued
        return False

    def evaluate_int(self, j: int) -> int:
        """Exact integer value; only for integer-valued functionals."""
        if j == 0:
            return 0
        fam = self.family
        if fam == "range":
            return 1
        if fam == "level":
            return int(j == self.param)
        if fam == "power":
            return j ** int(self.param)
        if fam == "hshift":
            return max(j + 1 - self.param, 0)
        if fam == "table":
            return int(self.values[j - 1]) if j <= len(self.values) else 0
        if fam == "truncated":
            return self.inner.evaluate_int(j) if j <= self.param else 0
        raise TypeError(f"{self.ident} is not integer valued")

    # -- metadata -------------------------------------------------------------------------

    @property
    def support_max(self) -> int | None:
        """Largest j with possibly nonzero f(j), or None for unbounded support."""
        fam = self.family
        if fam == "level":
            return self.param
        if fam == "table":
            return len(self.values)
        if fam == "truncated":
            inner = self.inner.support_max
            return self.param if inner is None else min(inner, self.param)
        return None

    @property
    def envelope(self) -> tuple[float, float, float]:
        """(C, alpha, rho) with |f(j)| <= C j^alpha rho^j for j >= 1."""
        fam = self.family
        if fam == "power":
            return 1.0, float(self.param), 1.0
        if fam == "hshift":
            return 1.0, 1.0, 1.0
        if fam == "geomhalf":
            return 1.0, 0.0, (1.0 - self.param) ** -0.5
        if fam == "truncated":
            return self.inner.envelope
        if fam == "table":
            return max((abs(v) for v in self.values), default=0.0), 0.0, 1.0
        return 1.0, 0.0, 1.0

    @property
    def ident(self) -> str:
        fam = self.family
        if fam == "range":
            return "range"
        if fam in ("level", "hshift"):
            return f"{fam}:{self.param}"
        if fam == "power":
            return f"power:{_fmt(self.param)}"
        if fam == "geomhalf":
            return "geomhalf" if self.param is None else f"geomhalf[{_fmt(self.param)}]"
        if fam == "table":
            return "table:" + ",".join(_fmt(v) for v in self.values)
        return f"{self.inner.ident}|p={self.param}"

    def resolve(self, gamma: float) -> "LocalFunctional":
        """Bind the escape probability of a ``geomhalf`` functional (no-op otherwise)."""
        if self.family == "geomhalf" and self.param is None:
            return replace(self, param=gamma)
        if self.family == "truncated":
            return replace(self, inner=self.inner.resolve(gamma))
        return self

    @property
    def resolved(self) -> bool:
        if self.family == "geomhalf":
            return self.param is not None
        if self.family == "truncated":
            return self.inner.resolved
        return True


def _fmt(x) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() and abs(x) < 2**53 else repr(x)


def indicator_range() -> LocalFunctional:
    return LocalFunctional("range")


def indicator_level(j: int) -> LocalFunctional:
    return LocalFunctional("level", j)


def power(alpha: float) -> LocalFunctional:
    return LocalFunctional("power", alpha)


def h_shift(j: int) -> LocalFunctional:
    """max(l + 1 - j, 0)."""
    return LocalFunctional("hshift", j)


def geometric_half(gamma: float | None = None) -> LocalFunctional:
    """(1 - gamma)^(-j/2); leave gamma unset to bind it at run time."""
    return LocalFunctional("geomhalf", gamma)


def user_table(values) -> LocalFunctional:
    return LocalFunctional("table", values=tuple(float(v) for v in values))


def truncate(f: LocalFunctional, p: int) -> LocalFunctional:
    if not isinstance(p, int) or p < 1:
        raise ValueError(f"truncation level must be an integer >= 1, got {p!r}")
    return LocalFunctional("truncated", p, inner=f)


def evaluate(f: LocalFunctional, j: int) -> float:
    return f.evaluate(j)


def parse_functional(text: str) -> LocalFunctional:
    """Config grammar: range | level:<j> | power:<alpha> | hshift:<j> | geomhalf | table:<v1,...>."""
    text = text.strip()
    name, _, arg = text.partition(":")
    try:
        if name == "range" and not arg:
            return indicator_range()
        if name == "level":
            return indicator_level(int(arg))
        if name == "power":
            return power(float(arg))
        if name == "hshift":
            return h_shift(int(arg))
        if name == "geomhalf" and not arg:
            return geometric_half()
        if name == "table" and arg:
            return user_table(float(v) for v in arg.split(","))
    except ValueError as exc:
        raise ValueError(f"invalid functional {text!r}: {exc}") from None
    raise ValueError(f"invalid functional {text!r}; expected range | level:<j> | power:<alpha> | "
                     f"hshift:<j> | geomhalf | table:<v1,v2,...>")


# -- summability conditions -----------------------------------------------------------------


@dataclass(frozen=True)
class ConditionVerdict:
    status: str  # "holds" | "fails" | "undecidable"
    certificate: str

    @property
    def holds(self) -> bool:
        return self.status == "holds"


def _check_gamma(gamma: float) -> None:
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma!r}")


def check_condition_l1(f: LocalFunctional, gamma: float) -> ConditionVerdict:
    """Decide whether sum_j |f(j)| (1-gamma)^j is finite."""
    _check_gamma(gamma)
    x = 1.0 - gamma
    if f.support_max is not None:
        return ConditionVerdict("holds", f"finite support j <= {f.support_max}")
    if not f.resolved:
        return ConditionVerdict("undecidable", "geomhalf functional has no gamma bound yet")
    c, alpha, rho = f.envelope
    ratio = rho * x
    if ratio < 1.0:
        return ConditionVerdict("holds", f"summand <= {_fmt(c)} j^{_fmt(alpha)} ({ratio!r})^j, ratio < 1")
    return ConditionVerdict("fails", f"summand = ({ratio!r})^j does not tend to 0")


def check_condition_l2(f: LocalFunctional, gamma: float) -> ConditionVerdict:
    """Decide whether sum_j f(j)^2 (1-gamma)^j / j is finite."""
    _check_gamma(gamma)
    x = 1.0 - gamma
    if f.support_max is not None:
        return ConditionVerdict("holds", f"finite support j <= {f.support_max}")
    if not f.resolved:
        return ConditionVerdict("undecidable", "geomhalf functional has no gamma bound yet")
    c, alpha, rho = f.envelope
    ratio = rho * rho * x
    if f.family == "geomhalf" or (f.family == "truncated" and f.inner.family == "geomhalf"):
        # exact summand (ratio)^j / j, not just an envelope
        if math.isclose(ratio, 1.0, rel_tol=1e-12, abs_tol=0.0):
            return ConditionVerdict("fails", "summand = 1/j, harmonic divergence")
        if ratio > 1.0:
            return ConditionVerdict("fails", f"summand = ({ratio!r})^j / j grows")
    if ratio < 1.0:
        return ConditionVerdict("holds", f"summand <= {_fmt(c * c)} j^{_fmt(2 * alpha - 1)} ({ratio!r})^j, ratio < 1")
    return ConditionVerdict("undecidable", f"envelope ratio {ratio!r} >= 1")


def eulerian_poly(m: int) -> list[int]:
    """Coefficients of the Eulerian polynomial A_m(x), with sum_{j>=1} j^m x^j = x A_m(x) / (1-x)^(m+1)."""
    row = [1]
    for n in range(2, m + 1):
        nxt = [0] * n
        for k in range(n):
            left = (k + 1) * row[k] if k < len(row) else 0
            right = (n - k) * row[k - 1] if 0 < k <= len(row) else 0
            nxt[k] = left + right
        row = nxt
    return row


def _closed_form(f: LocalFunctional, gamma: float, start: int) -> float | None:
    """gamma^2 sum_{j>=start} f(j) x^(j-1) in closed form, where one is shipped."""
    x = 1.0 - gamma
    fam = f.family
    if fam == "range":
        return gamma * x ** (start - 1)
    if fam == "hshift" and start == 1:
        return x ** (f.param - 1)
    if fam == "power" and start == 1 and float(f.param).is_integer() and 1 <= f.param <= 20:
        m = int(f.param)
        poly = math.fsum(c * x**k for k, c in enumerate(eulerian_poly(m)))
        return poly / gamma ** (m - 1)
    if fam == "geomhalf":
        r = x / math.sqrt(1.0 - f.param)
        return gamma * gamma * r**start / (x * (1.0 - r))
    return None


def theoretical_limit(f: LocalFunctional, gamma: float, rel_tol: float = 1e-12,
                      method: str = "auto") -> float:
    """gamma^2 * sum_{j>=1} f(j) (1-gamma)^(j-1).

    ``method="auto"`` uses a closed form when the family has one and otherwise
    the truncated series; ``"series"`` always sums, stopping once the family's
    tail envelope falls below ``rel_tol`` times the partial sum.
    """
    return tail_limit(f, gamma, 0, rel_tol, method)


def tail_limit(f: LocalFunctional, gamma: float, p: int, rel_tol: float = 1e-12,
               method: str = "auto") -> float:
    """gamma^2 * sum_{j>p} f(j) (1-gamma)^(j-1): the part of the limit a truncation at p drops."""
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma!r}")
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    if method not in ("auto", "series"):
        raise ValueError(f"unknown method {method!r}")
    start = p + 1
    if gamma == 1.0:
        return f.evaluate(1) if start == 1 else 0.0
    verdict = check_condition_l1(f, gamma)
    if not verdict.holds:
        raise ConditionError(f"{f.ident}: summability condition {verdict.status} ({verdict.certificate}); "
                             f"the limit series is not defined")
    x = 1.0 - gamma
    g2 = gamma * gamma
    if f.support_max is not None:
        return g2 * math.fsum(f.evaluate(j) * x ** (j - 1) for j in range(start, f.support_max + 1))
    if method == "auto":
        closed = _closed_form(f, gamma, start)
        if closed is not None:
            return closed
    c, alpha, rho = f.envelope
    a_pos = max(alpha, 0.0)
    terms: list[float] = []
    j = start - 1
    while True:
        j += 1
        terms.append(f.evaluate(j) * x ** (j - 1))
        if (j - start) % 16 and j - start > 8:
            continue
        partial = math.fsum(terms)
        q = ((j + 2) / (j + 1)) ** a_pos * rho * x
        if q < 1.0:
            # next envelope term in log space; rho**j alone can overflow
            log_next = math.log(c) + alpha * math.log(j + 1) + (j + 1) * math.log(rho) + j * math.log(x) if c > 0 else -math.inf
            tail = math.exp(log_next) / (1.0 - q)
            if tail <= rel_tol * abs(partial) or (partial == 0.0 and tail < 1e-300):
                return g2 * partial
        if j - start > 10_000_000:
            raise ConditionError(f"{f.ident}: series did not reach rel_tol={rel_tol} within 1e7 terms")
