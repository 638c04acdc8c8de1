"""Rate exponents for quadratic functional estimation over Lp and Besov balls.

A risk order ``n**(-a) * (ln n)**b`` is represented by the exponent pair
``(a, b)``; larger ``a`` is faster, and for equal ``a`` smaller ``b`` is
faster.  Constants are never reported, only exponents.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import sympy as sp

from .param_spaces import BallSpec, a_theta

__all__ = [
    "RateSummary",
    "TableCell",
    "minimax_rate",
    "lm_rate",
    "lm_exponents",
    "regime_table",
    "table_csv",
    "table_text",
    "TABLE_CELLS",
    "GAP_CELL",
    "P",
    "ALPHA",
]

P, ALPHA = sp.symbols("p alpha", positive=True)
_S = ALPHA + sp.Rational(1, 2) - 1 / P

EFFICIENT, BOUNDARY, SLOW_DENSE, SLOW_SPARSE = "Efficient", "Boundary", "SlowDense", "SlowSparse"

_BOUNDARY_RTOL = 1e-12


@dataclass(frozen=True)
class RateSummary:
    """Minimax exponent ``r``, adaptive log exponent and the regime label."""

    r: float
    log_exp: float
    regime: str
    efficient_constant: float | None = None

    def as_pair(self) -> tuple[float, float]:
        return (self.r, 0.0 if self.regime == EFFICIENT else self.log_exp)


def _sparse_exponents(p_star, s_star):
    e = 1 + 2 * p_star * s_star
    return 2 - p_star / e, 2 * p_star * s_star / e


def minimax_rate(ball: BallSpec) -> RateSummary:
    """Minimax exponent and the log exponent paid by adaptation.

    ``r = 1`` when ``alpha p* >= 1/2`` and ``2 - p*/(1 + 2 p* s*)``
    otherwise; the adaptive rate carries ``(ln n)**(2 p* s*/(1 + 2 p* s*))``
    except in the efficient regime ``alpha p* > 1/2``, where the risk is
    ``4 A / n`` to first order.
    """
    ap = ball.alpha * ball.p_star
    slow_r, log_exp = _sparse_exponents(ball.p_star, ball.s_star)
    if math.isclose(ap, 0.5, rel_tol=_BOUNDARY_RTOL, abs_tol=0.0):
        return RateSummary(1.0, log_exp, BOUNDARY)
    if ap > 0.5:
        return RateSummary(1.0, 0.0, EFFICIENT, 4.0 * a_theta(ball))
    return RateSummary(slow_r, log_exp, SLOW_SPARSE if ball.p < 2.0 else SLOW_DENSE)


def lm_rate(ball: BallSpec, n: int) -> float:
    """Risk envelope of the penalised-quadratic competitor, constant set to 1.

    ``min{(ln n / n**2)**(4s/(1+4s)), (ln n / n)**(4 alpha/(1+2 alpha))} + 1/n``,
    stated for ``p < 2`` only.
    """
    if not ball.p < 2.0:
        raise ValueError("the competitor envelope is only available for p < 2")
    if n < 20:
        raise ValueError("n must be at least 20")
    s, a, ln = ball.s, ball.alpha, math.log(n)
    first = (ln / n**2) ** (4 * s / (1 + 4 * s))
    second = (ln / n) ** (4 * a / (1 + 2 * a))
    return min(first, second) + 1.0 / n


# exponent pairs of the envelope's pieces, symbolic in (p, alpha)
_LM_PIECES = {
    "block": (8 * _S / (1 + 4 * _S), 4 * _S / (1 + 4 * _S)),
    "term": (4 * ALPHA / (1 + 2 * ALPHA), 4 * ALPHA / (1 + 2 * ALPHA)),
    "parametric": (sp.Integer(1), sp.Integer(0)),
}


def _faster(x, y):
    return x[0] > y[0] or (x[0] == y[0] and x[1] < y[1])


def _lm_choice(p, alpha) -> str:
    subs = {P: sp.nsimplify(p), ALPHA: sp.nsimplify(alpha)}
    val = {k: (sp.nsimplify(v[0].subs(subs)), sp.nsimplify(v[1].subs(subs))) for k, v in _LM_PIECES.items()}
    # the minimum of the two pieces is the faster one; adding 1/n keeps the slower of that and 1/n
    best = "block" if _faster(val["block"], val["term"]) else "term"
    return best if _faster(val["parametric"], val[best]) else "parametric"


def lm_exponents(p, alpha) -> tuple:
    """Symbolic exponent pair of the competitor's envelope at a point ``(p, alpha)``."""
    return _LM_PIECES[_lm_choice(p, alpha)]


def _q_exponents(p, alpha) -> tuple:
    p_star = sp.Min(p, 2)
    if alpha * p_star > sp.Rational(1, 2):
        return (sp.Integer(1), sp.Integer(0))
    ps = P if p < 2 else sp.Integer(2)
    r, b = _sparse_exponents(ps, ALPHA + sp.Rational(1, 2) - 1 / ps)
    return (sp.simplify(r), sp.simplify(b))


@dataclass(frozen=True)
class TableCell:
    """Region of ``(p, alpha)`` bounded below and above in each coordinate.

    ``alpha_lo`` is exclusive and ``alpha_hi`` inclusive (None means
    unbounded); ``p_lo`` is inclusive and ``p_hi`` exclusive.
    """

    p_lo: sp.Expr
    p_hi: sp.Expr
    alpha_lo: sp.Expr | None
    alpha_hi: sp.Expr | None
    p_label: str
    alpha_label: str

    def contains(self, p, alpha) -> bool:
        if not (self.p_lo <= p < self.p_hi):
            return False
        lo = _alpha_floor(p) if self.alpha_lo is None else self.alpha_lo.subs(P, p)
        if not alpha > lo:
            return False
        return self.alpha_hi is None or alpha <= self.alpha_hi.subs(P, p)

    def interior_point(self):
        p = (self.p_lo + self.p_hi) / 2
        lo = _alpha_floor(p) if self.alpha_lo is None else self.alpha_lo.subs(P, p)
        hi = lo + 1 if self.alpha_hi is None else self.alpha_hi.subs(P, p)
        return sp.nsimplify(p), sp.nsimplify((lo + hi) / 2)


def _alpha_floor(p):
    # smallest admissible alpha: s = alpha + 1/2 - 1/p must stay positive
    return sp.Max(sp.Integer(0), 1 / sp.nsimplify(p) - sp.Rational(1, 2))


_h = sp.Rational
# In the 4/3 <= p < 2 column the cut points 2/p - 1 and 1/(2p) cross at
# p = 3/2.  The bounds below keep the published labels but use min/max so
# the cells stay disjoint for every p; the sliver they leave uncovered is
# GAP_CELL.
TABLE_CELLS = (
    TableCell(sp.Integer(0), sp.Integer(1), 1 / P - _h(1, 2), None, "0<p<1", "alpha>1/p-1/2"),
    TableCell(sp.Integer(1), _h(4, 3), None, 1 / (2 * P), "1<=p<4/3", "alpha<=1/(2p)"),
    TableCell(sp.Integer(1), _h(4, 3), 1 / (2 * P), _h(1, 2), "1<=p<4/3", "1/(2p)<alpha<=1/2"),
    TableCell(sp.Integer(1), _h(4, 3), _h(1, 2), None, "1<=p<4/3", "alpha>1/2"),
    TableCell(_h(4, 3), sp.Integer(2), None, sp.Min(2 / P - 1, 1 / (2 * P)), "4/3<=p<2", "alpha<=2/p-1"),
    TableCell(_h(4, 3), sp.Integer(2), 2 / P - 1, 1 / (2 * P), "4/3<=p<2", "2/p-1<alpha<=1/(2p)"),
    TableCell(_h(4, 3), sp.Integer(2), sp.Max(1 / (2 * P), 2 / P - 1), 1 / P - _h(1, 4),
              "4/3<=p<2", "1/(2p)<alpha<=1/p-1/4"),
    TableCell(_h(4, 3), sp.Integer(2), 1 / P - _h(1, 4), None, "4/3<=p<2", "alpha>1/p-1/4"),
)
GAP_CELL = TableCell(_h(4, 3), _h(3, 2), 1 / (2 * P), 2 / P - 1, "4/3<=p<3/2", "1/(2p)<alpha<=2/p-1")


def _row(cell: TableCell, p, alpha) -> dict:
    lm = lm_exponents(p, alpha)
    q = _q_exponents(p, alpha)
    return {"p_range": cell.p_label, "alpha_range": cell.alpha_label,
            "lm_n_exp": lm[0], "lm_log_exp": lm[1], "q_n_exp": q[0], "q_log_exp": q[1]}


def regime_table(p_grid=None, alpha_grid=None) -> list[dict]:
    """Exponent pairs of both estimators, one row per comparison cell.

    With no grids each of the eight cells is evaluated at an interior point.
    Otherwise every ``(p, alpha)`` grid point is located in its cell and each
    cell that is hit contributes one row, in table order.  Points in
    ``GAP_CELL`` add one trailing row; points with ``s <= 0`` or ``p >= 2``
    are ignored.  Exponents are sympy expressions in ``p`` and
    ``alpha``.
    """
    if p_grid is None and alpha_grid is None:
        return [_row(c, *c.interior_point()) for c in TABLE_CELLS]
    if p_grid is None or alpha_grid is None:
        raise ValueError("give both p_grid and alpha_grid, or neither")
    hits = {}
    for p in p_grid:
        for a in alpha_grid:
            pr, ar = sp.nsimplify(p), sp.nsimplify(a)
            for idx, cell in enumerate(TABLE_CELLS + (GAP_CELL,)):
                if idx not in hits and cell.contains(pr, ar):
                    hits[idx] = _row(cell, pr, ar)
    return [hits[i] for i in sorted(hits)]


_COLUMNS = ("p_range", "alpha_range", "lm_n_exp", "lm_log_exp", "q_n_exp", "q_log_exp")


def table_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_COLUMNS)
    for r in rows:
        w.writerow([str(r[c]) for c in _COLUMNS])
    return buf.getvalue()


def table_text(rows) -> str:
    cells = [[str(r[c]) for c in _COLUMNS] for r in rows]
    widths = [max(len(c), *(len(x[i]) for x in cells)) for i, c in enumerate(_COLUMNS)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(_COLUMNS, widths))]
    lines += ["  ".join(x.ljust(w) for x, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)
