import re
from pathlib import Path

import yaml
from pydantic import ValidationError

from .config_models import PARAMETER_MODELS, Experiment, ExperimentConfig, RunSection
from .project_logger import getMainLogger


class ConfigError(ValueError):
    """
    Invalid experiment configuration, located by file and line when known
    """

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{where}{message}")


_SECTION = re.compile(r"^\[\s*([A-Za-z0-9_\-]+)\s*\]$")
_KEY_VALUE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")
_META_SUFFIXES = (".meta", ".yaml", ".yml")


def _split(text: str) -> list[str]:
    return [tok for tok in re.split(r"[,\s]+", text.strip()) if tok]


def parse_value(text: str):
    """
    `a` -> "a"; `a, b c` -> ["a", "b", "c"]; `a b c; d e f` -> [["a","b","c"], ["d","e","f"]]
    """
    if ";" in text:
        return [_split(part) for part in text.split(";") if part.strip()]
    tokens = _split(text)
    if not tokens:
        return None
    return tokens[0] if len(tokens) == 1 else tokens


class ConfigManager:
    """
    Reads an experiment file (`[section]` headers and `key = value` lines) or the YAML `.meta`
    echo of a previous run, and validates it into an ExperimentConfig.
    """

    _logger = getMainLogger()

    def __init__(self, config_path: str | Path):
        self.path = config_path

    @property
    def path(self) -> Path:
        return self._path

    @path.setter
    def path(self, path: str | Path) -> None:
        self._path = Path(path)
        self.load()

    @property
    def config(self) -> ExperimentConfig:
        """
        Validated experiment configuration
        """
        return self._config

    def load(self) -> ExperimentConfig:
        """
        Load and validate the configuration file

        Raises:
            ConfigError: syntax or validation error, with the offending line when known
        """
        self._lines: dict[tuple[str, str], int] = {}
        try:
            text = self.path.read_text()
        except OSError as err:
            raise ConfigError(f"Cannot read configuration: {err}", self.path)

        if self.path.suffix in _META_SUFFIXES:
            run_raw, params_raw = self._read_yaml(text)
        else:
            run_raw, params_raw = self._read_sections(text)
        self._config = self._validate(run_raw, params_raw)
        self._logger.info(f"Valid configuration for experiment [{self._config.experiment}]")
        return self._config

    def _read_yaml(self, text: str) -> tuple[dict, dict]:
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as err:
            line = None
            mark = getattr(err, "problem_mark", None)
            if mark is not None:
                line = mark.line + 1
            raise ConfigError(f"Malformed YAML: {err}", self.path, line)
        if not isinstance(raw, dict) or not isinstance(raw.get("run"), dict):
            raise ConfigError("Missing [run] mapping", self.path)
        run_raw = raw["run"]
        name = run_raw.get("experiment")
        unknown = set(raw) - {"run", "info", str(name)}
        if unknown:
            raise ConfigError(f"Unknown sections {sorted(unknown)}", self.path)
        return run_raw, raw.get(str(name)) or {}

    def _read_sections(self, text: str) -> tuple[dict, dict]:
        sections: dict[str, dict] = {}
        headers: dict[str, int] = {}
        current = None
        for number, raw_line in enumerate(text.splitlines(), start=1):
            # full-line comments start with # or ;, inline ones with #
            line = raw_line.split("#", 1)[0].strip()
            if not line or line.startswith(";"):
                continue
            if match := _SECTION.match(line):
                current = match.group(1)
                if current in sections:
                    raise ConfigError(f"Duplicate section [{current}]", self.path, number)
                sections[current] = {}
                headers[current] = number
                continue
            match = _KEY_VALUE.match(line)
            if match is None:
                raise ConfigError(f"Expected `key = value`, got `{raw_line.strip()}`", self.path, number)
            if current is None:
                raise ConfigError("Key outside of any section", self.path, number)
            key, value = match.group(1), match.group(2)
            if key in sections[current]:
                raise ConfigError(f"Duplicate key [{key}]", self.path, number)
            parsed = parse_value(value)
            if parsed is None:
                raise ConfigError(f"Missing value for [{key}]", self.path, number)
            sections[current][key] = parsed
            self._lines[(current, key)] = number

        if "run" not in sections:
            raise ConfigError("Missing [run] section", self.path)
        name = sections["run"].get("experiment")
        self._lines[("run", "")] = headers["run"]
        for section, number in headers.items():
            if section not in ("run", name):
                raise ConfigError(f"Unknown section [{section}]", self.path, number)
        if name is not None:
            self._lines.setdefault(("params", ""), headers.get(name, headers["run"]))
            for (section, key), number in list(self._lines.items()):
                if section == name:
                    self._lines[("params", key)] = number
        return sections["run"], sections.get(name, {})

    def _validate(self, run_raw: dict, params_raw: dict) -> ExperimentConfig:
        try:
            run = RunSection.model_validate(run_raw)
        except ValidationError as err:
            raise self._located(err, "run")
        try:
            params = PARAMETER_MODELS[Experiment(run.experiment)].model_validate(params_raw)
        except ValidationError as err:
            raise self._located(err, "params")
        return ExperimentConfig(run=run, params=params)

    def _located(self, err: ValidationError, section: str) -> ConfigError:
        """First error of [err] as a ConfigError pointing at the offending key's line"""
        details = err.errors()
        first = details[0]
        key = str(first["loc"][0]) if first["loc"] else ""
        line = self._lines.get((section, key)) or self._lines.get((section, ""))
        label = f"[{section}] {key}".strip() if section == "run" else key
        messages = "; ".join(
            f"{'.'.join(str(part) for part in d['loc']) or label}: {d['msg']}" for d in details
        )
        return ConfigError(f"Invalid {label or section}: {messages}", self.path, line)
