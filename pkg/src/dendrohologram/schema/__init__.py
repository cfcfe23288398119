"""Versioned JSON schema for ``report.json``."""

import json
from importlib import resources

import jsonschema

from ..errors import IngestionError


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("report.schema.json").read_text("utf-8"))


def validate_report(report: dict) -> None:
    try:
        jsonschema.validate(report, load_schema())
    except jsonschema.ValidationError as exc:
        raise IngestionError(f"report does not match schema: {exc.message}") from exc
