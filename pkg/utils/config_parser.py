# utils/config_parser.py
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError

from exceptions import ConfigurationError
from schema.run_config import RunConfig

logger = logging.getLogger("choquard")

SECTIONS = tuple(RunConfig.model_fields.keys() - {"warnings"})


def _is_list(section: str, key: str) -> bool:
    model = RunConfig.model_fields[section].annotation
    field = model.model_fields.get(key)
    return field is not None and getattr(field.annotation, "__origin__", None) is list


def _coerce(section: str, key: str, raw: str) -> Any:
    """Literal value from the right-hand side.

    Only list-typed keys are split: ``[...]`` as JSON, otherwise on commas, and a
    single item becomes a one-element list. Every other value goes to pydantic
    as written.
    """
    text = raw.strip()
    if not _is_list(section, key):
        return text
    if text.startswith("["):
        try:
            return json.loads(text)
        except json.JSONDecodeError:
            text = text.strip("[]")
    return [item.strip() for item in text.split(",") if item.strip()]


def parse_text(text: str, source: str = "<config>") -> RunConfig:
    """
    Parse flat ``section.key = value`` lines into a RunConfig.

    Args:
        text: Config body; ``#`` starts a comment, blank lines are skipped
        source: Name used in error messages

    Returns:
        RunConfig: validated configuration (defaults for anything unset)
    """
    tree: Dict[str, Dict[str, Any]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'section.key = value'", {"line": lineno})
        lhs, rhs = line.split("=", 1)
        dotted = lhs.strip()
        if dotted.count(".") != 1:
            raise ConfigurationError(f"{source}:{lineno}: key '{dotted}' must be 'section.key'",
                                     {"key": dotted, "line": lineno})
        section, key = (part.strip() for part in dotted.split("."))
        if section not in SECTIONS:
            raise ConfigurationError(f"{source}:{lineno}: unknown section '{section}' in '{dotted}'",
                                     {"key": dotted, "allowed": sorted(SECTIONS)})
        if key in tree.setdefault(section, {}):
            logger.warning(f"⚠️ {source}:{lineno}: '{dotted}' set twice, last value wins")
        tree[section][key] = _coerce(section, key, rhs)
    return build_config(tree, source)


def build_config(tree: Dict[str, Dict[str, Any]], source: str = "<config>") -> RunConfig:
    try:
        cfg = RunConfig.model_validate(tree)
    except ValidationError as exc:
        first = exc.errors()[0]
        dotted = ".".join(str(p) for p in first["loc"])
        raise ConfigurationError(
            f"{source}: invalid value for '{dotted}': {first['msg']}",
            {"key": dotted, "errors": [{"key": ".".join(str(p) for p in e["loc"]), "msg": e["msg"]}
                                       for e in exc.errors()]},
        ) from exc
    for warning in cfg.warnings:
        logger.warning(f"⚠️ {warning}")
    return cfg


def parse_config(path: Optional[Union[str, Path]]) -> RunConfig:
    """Read a config file; ``None`` gives the defaults"""
    if path is None:
        return build_config({}, "<defaults>")
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}", {"path": str(path)})
    return parse_text(path.read_text(encoding="utf-8"), source=path.name)


def apply_overrides(cfg: RunConfig, overrides: Dict[str, str]) -> RunConfig:
    """Re-validate with ``section.key`` overrides from the command line"""
    tree = cfg.echo()
    for dotted, raw in overrides.items():
        if dotted.count(".") != 1:
            raise ConfigurationError(f"override '{dotted}' must be 'section.key'", {"key": dotted})
        section, key = dotted.split(".")
        if section not in SECTIONS:
            raise ConfigurationError(f"unknown section '{section}' in '{dotted}'", {"key": dotted})
        tree[section][key] = _coerce(section, key, raw)
    return build_config(tree, "<overrides>")
