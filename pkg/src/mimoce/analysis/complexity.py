"""Closed-form FLOPs and parameter counts for every estimator.

Only real multiplications are counted (a complex multiply is four), and BN
weights/biases are left out, following the usual accounting for this
comparison. Reference totals are the quoted values at
N=128, M=32, L_p=10, I_E=50.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

__all__ = [
    "ComplexityError",
    "ComplexityReport",
    "FULL_SCALE_CONSTANTS",
    "REFERENCE_COMPLEXITY",
    "complexity_report",
    "reference_reports",
    "ALGORITHMS",
]


class ComplexityError(KeyError):
    pass


FULL_SCALE_CONSTANTS = {
    "N": 128, "M": 32, "L_p": 10, "I_E": 50,
    "N_B": 4, "F": 96, "L_I": 7, "L_H": 5, "L_O": 1,
    "F_fnn": 16, "C_fnn": 192,
    "region_width_deg": 3.0, "sine_sharing": True,
    "drop_final_attention": True, "include_acquisition": True,
}

# (FLOPs, parameters) reference totals; FLOPs x1e7 and parameters x1e6 already expanded
REFERENCE_COMPLEXITY = {
    "cnn": (1.794e7, 0.141e6),
    "cnn-att": (1.801e7, 0.169e6),
    "mmse-regional": (1.689e7, 1.966e6),
    "fnn-att": (0.103e7, 1.072e6),
    "svbi": (5.516e7, 0.0),
}


@dataclass
class ComplexityReport:
    algorithm: str
    flops: dict[str, float]
    params: dict[str, float]
    constants: dict = field(default_factory=dict)
    reference: tuple[float, float] | None = None

    @property
    def total_flops(self) -> float:
        return float(sum(self.flops.values()))

    @property
    def total_params(self) -> float:
        return float(sum(self.params.values()))

    def discrepancy(self) -> dict | None:
        """Relative deviation of the formula totals from the reference table entry."""
        if self.reference is None:
            return None
        rf, rp = self.reference
        return {
            "flops_rel": (self.total_flops - rf) / rf if rf else None,
            "params_rel": (self.total_params - rp) / rp if rp else (0.0 if self.total_params == 0 else None),
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total_flops"] = self.total_flops
        d["total_params"] = self.total_params
        d["discrepancy"] = self.discrepancy()
        return d


def _need(c: dict, algorithm: str, *keys):
    missing = [k for k in keys if k not in c]
    if missing:
        raise ComplexityError(f"{algorithm}: missing constant(s) {', '.join(missing)}")
    return [c[k] for k in keys]


def _cnn_core(c, algorithm):
    n, f, nb, li, lh, lo = _need(c, algorithm, "N", "F", "N_B", "L_I", "L_H", "L_O")
    flops = (2 * li * f + 2 * lo * f + lh * f * f * (nb - 1)) * n
    params = 2 * (li + lo) * f + lh * (nb - 1) * f * f
    return flops, params


def _acquisition_full(c, algorithm):
    if not c.get("include_acquisition", True):
        return {}
    n, lp = _need(c, algorithm, "N", "L_p")
    return {"acquisition": 4 * n * lp * lp}


def _acquisition_had(c, algorithm):
    if not c.get("include_acquisition", True):
        return {}
    m, lp = _need(c, algorithm, "M", "L_p")
    return {"acquisition": 4 * m * lp * lp}


def _n_regions(c, algorithm):
    (width,) = _need(c, algorithm, "region_width_deg")
    span = 180.0 if c.get("sine_sharing", True) else 360.0
    return max(1, math.ceil(span / width - 1e-9))


def _ls(c):
    return _acquisition_full(c, "ls"), {}


def _cnn(c):
    flops, params = _cnn_core(c, "cnn")
    return {"core": flops, **_acquisition_full(c, "cnn")}, {"core": params}


def _cnn_att(c):
    flops, params = _cnn_core(c, "cnn-att")
    n, f, nb = _need(c, "cnn-att", "N", "F", "N_B")
    n_att = nb - 1 if c.get("drop_final_attention", True) else nb
    return ({"core": flops, "attention": n_att * f * (n + f + 1), **_acquisition_full(c, "cnn-att")},
            {"core": params, "attention": n_att * f * f})


def _mmse_flops(c, algorithm):
    (n,) = _need(c, algorithm, "N")
    return {"core": 4 * (2 * n ** 3 + n ** 2), **_acquisition_full(c, algorithm)}


def _mmse_single(c):
    (n,) = _need(c, "mmse-single", "N")
    return _mmse_flops(c, "mmse-single"), {"ccm": 2 * n * n}


def _mmse_regional(c):
    (n,) = _need(c, "mmse-regional", "N")
    return _mmse_flops(c, "mmse-regional"), {"ccm": _n_regions(c, "mmse-regional") * 2 * n * n}


def _fnn_att(c):
    n, m, f, ch = _need(c, "fnn-att", "N", "M", "F_fnn", "C_fnn")
    fc = f * ch
    return ({"core": fc * (2 * m + 2 * n + 1), "attention": ch * (ch + 1), **_acquisition_had(c, "fnn-att")},
            {"core": fc * (2 * m + 2 * n), "attention": ch * ch})


def _svbi(c):
    n, m, ie = _need(c, "svbi", "N", "M", "I_E")
    return {"core": ie * (2.0 / 3.0 * m ** 3 + (2 * m + 2) * n * n), **_acquisition_had(c, "svbi")}, {}


ALGORITHMS = {
    "ls": _ls,
    "cnn": _cnn,
    "cnn-att": _cnn_att,
    "mmse-single": _mmse_single,
    "mmse-regional": _mmse_regional,
    "fnn-att": _fnn_att,
    "svbi": _svbi,
}


def complexity_report(algorithm: str, constants: dict | None = None) -> ComplexityReport:
    """Evaluate the FLOPs/parameter closed forms of ``algorithm``.

    ``constants`` defaults to the full-scale reference set; missing keys raise
    :class:`ComplexityError`.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}")
    c = dict(FULL_SCALE_CONSTANTS if constants is None else constants)
    flops, params = ALGORITHMS[algorithm](c)
    ref = REFERENCE_COMPLEXITY.get(algorithm) if _is_reference_setting(c) else None
    return ComplexityReport(algorithm, {k: float(v) for k, v in flops.items()},
                            {k: float(v) for k, v in params.items()}, c, ref)


def _is_reference_setting(c: dict) -> bool:
    return all(c.get(k) == v for k, v in FULL_SCALE_CONSTANTS.items() if k not in ("include_acquisition",))


def reference_reports(constants: dict | None = None) -> list[ComplexityReport]:
    return [complexity_report(a, constants) for a in ("cnn", "cnn-att", "mmse-regional", "fnn-att", "svbi")]
