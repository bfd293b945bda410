"""JSON chain-spec files in, JSON reports out."""

from __future__ import annotations

import json
import math
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from .chain_model import BirthDeath, JumpDistribution, JumpKernel, Rescaled, SplittableExample
from .spec_lang import ExprError, parse

__all__ = [
    "SpecFileError",
    "load_schema",
    "spec_from_dict",
    "load_spec",
    "corpus_paths",
    "sanitize",
    "dumps",
    "validate_report",
]

EXPR_FIELDS = {
    "birth_death": ("p",),
    "splittable_example": ("p_even", "p_mod1", "p_mod3"),
}


class SpecFileError(ValueError):
    """Schema or expression problems in a spec file; ``problems`` lists all of them."""

    def __init__(self, problems: list, source: str | None = None):
        self.problems = problems
        self.source = source
        head = f"{source}: " if source else ""
        super().__init__(head + "; ".join(problems))


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("lamperti").joinpath(f"data/{name}.schema.json").read_text()
    return json.loads(text)


def _where(path) -> str:
    return "/" + "/".join(str(p) for p in path) if path else ""


KINDS = ("birth_death", "jump_kernel", "splittable_example", "rescaled")


def _schema_problems(doc, prefix: str = "") -> list:
    if not isinstance(doc, dict):
        return [f"{prefix or '<root>'}: spec must be a JSON object"]
    kind = doc.get("kind")
    if kind not in KINDS:
        return [f"{prefix}/kind: unknown kind {kind!r}; expected one of {', '.join(KINDS)}"]
    # validate against this kind's branch so messages name the offending key
    schema = load_schema("chain_spec")
    branch = {"$ref": f"#/$defs/{kind}", "$defs": schema["$defs"]}
    validator = jsonschema.Draft202012Validator(branch)
    problems = [
        f"{(prefix + _where(e.absolute_path)) or '<root>'}: {e.message}"
        for e in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
        if not (kind == "rescaled" and list(e.absolute_path)[:1] == ["inner"])
    ]
    if kind == "rescaled" and "inner" in doc:
        problems += _schema_problems(doc["inner"], prefix + "/inner")
    return problems


def _expr_problems(doc: dict, prefix: str = "") -> list:
    problems = []
    kind = doc["kind"]

    def check(path, text):
        try:
            parse(text)
        except ExprError as exc:
            problems.append(f"{prefix}/{path}: {exc}")

    for key in EXPR_FIELDS.get(kind, ()):
        check(key, doc[key])
    if kind == "jump_kernel":
        for i, item in enumerate(doc["jumps"]):
            check(f"jumps/{i}/weight", item["weight"])
    if kind == "rescaled":
        problems += _expr_problems(doc["inner"], prefix + "/inner")
    return problems


def _build(doc: dict, strict: bool):
    kind = doc["kind"]
    if kind == "birth_death":
        spec = BirthDeath(doc["p"], strict=strict)
    elif kind == "splittable_example":
        spec = SplittableExample(doc["p_even"], doc["p_mod1"], doc["p_mod3"], strict=strict)
    elif kind == "jump_kernel":
        boundary = {}
        for row in doc["boundary"]:
            if row["state"] in boundary:
                raise SpecFileError([f"/boundary: state {row['state']} listed twice"])
            support = sorted((d["jump"], float(d["prob"])) for d in row["dist"])
            boundary[row["state"]] = JumpDistribution(tuple(support))
        spec = JumpKernel(
            tuple((j["jump"], j["weight"]) for j in doc["jumps"]),
            boundary,
            doc["boundary_level"],
            declared_max_jump=doc["max_jump"],
            strict=strict,
        )
    else:
        spec = Rescaled(_build(doc["inner"], strict), doc["k"])
    if doc["max_jump"] < spec.max_jump:
        raise SpecFileError(
            [f"/max_jump: declared {doc['max_jump']} but the kernel jumps by up to {spec.max_jump}"]
        )
    return spec


def spec_from_dict(doc, strict: bool = False, source: str | None = None):
    """Validate a decoded spec document and build the chain.

    Every schema violation and every expression parse error is reported
    together in one :class:`SpecFileError`.
    """
    problems = _schema_problems(doc)
    if problems:
        raise SpecFileError(problems, source)
    problems = _expr_problems(doc)
    if problems:
        raise SpecFileError(problems, source)
    try:
        return _build(doc, strict)
    except SpecFileError as exc:
        raise SpecFileError(exc.problems, source) from None
    except ValueError as exc:
        raise SpecFileError([str(exc)], source) from None


def load_spec(path, strict: bool = False):
    """Read a spec file; returns ``(spec, document)``."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SpecFileError([f"line {exc.lineno} column {exc.colno}: {exc.msg}"], str(path)) from None
    return spec_from_dict(doc, strict, str(path)), doc


def corpus_paths() -> list:
    """Bundled example specs, sorted by file name."""
    root = resources.files("lamperti").joinpath("data/corpus")
    return sorted((Path(str(p)) for p in root.iterdir() if p.name.endswith(".json")), key=lambda p: p.name)


def sanitize(obj):
    """Replace non-finite floats with None and numpy scalars with Python ones."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps(obj) -> str:
    return json.dumps(sanitize(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def validate_report(report: dict) -> None:
    jsonschema.validate(report, load_schema("report"))
