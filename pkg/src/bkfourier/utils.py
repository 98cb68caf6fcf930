import re
from typing import Iterable, List, Optional, Tuple

from sympy import factorint


def split_names(value) -> List[str]:
    if value is None:
        return []
    if isinstance(value, str):
        parts = re.split(r"[,\s]+", value.strip())
    else:
        parts = [str(v).strip() for v in value]
    return [p.lower() for p in parts if p]


def parse_int_list(value) -> List[int]:
    if value is None:
        return []
    if isinstance(value, int):
        return [value]
    out = []
    for part in split_names(value):
        if not re.fullmatch(r"\d+", part):
            raise ValueError(f"not a positive integer: {part!r}")
        out.append(int(part))
    return out


def prime_power(q: int) -> Optional[Tuple[int, int]]:
    """(p, k) with q = p^k, or None."""
    if q < 2:
        return None
    factors = factorint(q)
    if len(factors) != 1:
        return None
    ((p, k),) = factors.items()
    return int(p), int(k)


def slugify(text: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", str(text).lower())
    return slug.strip("-") or "table"


def dedupe(values: Iterable) -> list:
    seen = set()
    out = []
    for v in values:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out
