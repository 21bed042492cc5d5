"""Number serialization for CSV output.

Display columns use scientific notation with six significant digits
("6.18034e-01"), close to how the experiment tables print values; the
sentinel -1 for undefined quantities serializes literally as "-1".
Full-precision dumps keep every working digit.
"""
from __future__ import annotations

import mpmath.libmp as libmp


def format_sci(x, sig: int = 6) -> str:
    """Scientific notation with ``sig`` significant digits, e.g. 2.50000e-06."""
    if x == 0:
        return "0." + "0" * (sig - 1) + "e+00"
    if hasattr(x, "_mpf_"):
        raw = x._mpf_
    else:
        from mpmath import mpf
        raw = mpf(x)._mpf_
    s = libmp.to_str(raw, sig, strip_zeros=False, min_fixed=1, max_fixed=0)
    if "e" in s:
        mant, exp = s.split("e")
    else:
        mant, exp = s, "0"
    if "." not in mant:
        mant += "." + "0" * (sig - 1)
    return f"{mant}e{int(exp):+03d}"


def format_metric(x, sig: int = 6) -> str:
    """Like :func:`format_sci` but the sentinel -1 stays literal."""
    if x == -1:
        return "-1"
    return format_sci(x, sig)


def format_full(x, digits: int) -> str:
    """Full-precision decimal dump (round-trips at the same precision)."""
    if x == -1:
        return "-1"
    if hasattr(x, "_mpf_"):
        return libmp.to_str(x._mpf_, digits, strip_zeros=True)
    return repr(x)
