"""
Configuration File Ingestion Module
Loads the mechanism + run configuration file (JSON), applies command-line
overrides and writes configurations back out.

File layout:
    {
      "mechanism": {"setting": "discrete", "d": 1.0, "c": 1.0, "pi": {"1": 1.0}},
      "run": {"seed": 7, "replicas": 1000, "t_max": 100.0}
    }
"""

import json
import os
import sys
from pathlib import Path

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config
from Mechanism.mechanisms import mechanism_from_dict, mechanism_to_dict

SECTIONS = ('mechanism', 'run')
MECHANISM_FIELDS = {
    'discrete': {'setting', 'd', 'c', 'pi'},
    'continuous': {'setting', 'alpha', 'b', 'gamma', 'c', 'atoms', 'exp_jumps'},
}
EXP_JUMP_FIELDS = {'rate', 'mean'}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration file."""


def parse_config_text(text, source="<config>"):
    """
    Parse the JSON text of a configuration file.

    Args:
        text (str): File contents
        source (str): Name used in error messages

    Returns:
        dict: Raw sections

    Raises:
        ConfigError: With line and column for malformed JSON, or naming the
            section and field for unknown or missing entries
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: line {e.lineno}, column {e.colno}: {e.msg}") from None

    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be an object with sections {SECTIONS}")
    for section in raw:
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section '{section}' (expected {SECTIONS})")
    if 'mechanism' not in raw:
        raise ConfigError(f"{source}: missing section 'mechanism'")
    raw.setdefault('run', {})
    _check_fields(raw, source)
    return raw


def _check_fields(raw, source):
    mechanism = raw['mechanism']
    if not isinstance(mechanism, dict):
        raise ConfigError(f"{source}: section 'mechanism' must be an object")
    setting = mechanism.get('setting', 'discrete')
    if setting not in MECHANISM_FIELDS:
        raise ConfigError(
            f"{source}: mechanism.setting must be 'discrete' or 'continuous', got '{setting}'"
        )
    for key in mechanism:
        if key not in MECHANISM_FIELDS[setting]:
            raise ConfigError(f"{source}: unknown field '{key}' in section 'mechanism' "
                              f"({setting} setting)")
    if 'c' not in mechanism:
        raise ConfigError(f"{source}: missing field 'c' in section 'mechanism'")
    for key in mechanism.get('exp_jumps') or {}:
        if key not in EXP_JUMP_FIELDS:
            raise ConfigError(f"{source}: unknown field '{key}' in section 'mechanism.exp_jumps'")

    run = raw['run']
    if not isinstance(run, dict):
        raise ConfigError(f"{source}: section 'run' must be an object")
    known = config.run_field_names()
    for key in run:
        if key not in known:
            raise ConfigError(f"{source}: unknown field '{key}' in section 'run'")


def _parse_value(text):
    """JSON value if the text parses as one, the bare string otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(arguments):
    """
    Turn `--key=value` / `--mechanism.key=value` arguments into override pairs.

    Args:
        arguments (list): Leftover command-line arguments

    Returns:
        list: (section, key, value) triples, section 'run' or 'mechanism'

    Raises:
        ConfigError: If an argument is not of the form --key=value
    """
    overrides = []
    for argument in arguments:
        if not argument.startswith('--') or '=' not in argument:
            raise ConfigError(f"Override must look like --key=value, got '{argument}'")
        key, value = argument[2:].split('=', 1)
        section, _, field_name = key.rpartition('.')
        section = section or 'run'
        if section not in SECTIONS:
            raise ConfigError(f"Unknown override section '{section}' in '{argument}'")
        overrides.append((section, field_name.replace('-', '_'), _parse_value(value)))
    return overrides


def apply_overrides(raw, overrides, source="<overrides>"):
    """
    Return a copy of the raw sections with overrides applied and re-checked.

    Args:
        raw (dict): Output of parse_config_text
        overrides (list): (section, key, value) triples

    Returns:
        dict: Updated raw sections
    """
    updated = {section: dict(raw.get(section, {})) for section in SECTIONS}
    for section, key, value in overrides:
        updated[section][key] = value
    _check_fields(updated, source)
    return updated


def build(raw, source="<config>"):
    """
    Mechanism and RunConfig from raw sections.

    Returns:
        tuple: (mechanism, c, RunConfig)

    Raises:
        ConfigError: If a value is out of range
    """
    try:
        mech, c = mechanism_from_dict(raw['mechanism'])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{source}: section 'mechanism': {e}") from None
    try:
        cfg = config.get_run_config(**raw.get('run', {}))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{source}: section 'run': {e}") from None
    return mech, c, cfg


def load_config(config_path, overrides=()):
    """
    Load a configuration file and apply overrides.

    Args:
        config_path (str): Path to the JSON file
        overrides (list): (section, key, value) triples from parse_overrides

    Returns:
        tuple: (mechanism, c, RunConfig, raw sections after overrides)

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigError: On any parse or validation problem
    """
    if not os.path.exists(config_path):
        raise FileNotFoundError(f"Config file not found: {config_path}")
    with open(config_path, 'r') as f:
        raw = parse_config_text(f.read(), source=str(config_path))
    if overrides:
        raw = apply_overrides(raw, overrides)
    mech, c, cfg = build(raw, source=str(config_path))
    return mech, c, cfg, raw


def save_mechanism(mech, c=None):
    """Mechanism section in file layout (continuous mechanisms in canonical alpha form)."""
    return mechanism_to_dict(mech, c)


def save_config(output_path, mech, cfg, c=None):
    """
    Write a configuration file that load_config reads back to the same objects.

    Args:
        output_path (str): Destination path
        mech (DiscreteMechanism | LevyMechanism): Mechanism
        cfg (RunConfig): Run configuration
        c (float): Competition rate of a continuous mechanism
    """
    Path(output_path).parent.mkdir(parents=True, exist_ok=True)
    document = {'mechanism': save_mechanism(mech, c), 'run': cfg.as_dict()}
    with open(output_path, 'w') as f:
        json.dump(document, f, indent=2)
    print(f"✓ Config saved to: {output_path}")


def load_run_config(config_path, overrides=()):
    """
    RunConfig for commands that do not need a mechanism (validate, converge).

    The file is read when it exists; otherwise the defaults of config.py are
    used. Mechanism overrides are rejected.

    Returns:
        tuple: (RunConfig, run section after overrides)
    """
    run = {}
    if config_path and os.path.exists(config_path):
        with open(config_path, 'r') as f:
            run = dict(parse_config_text(f.read(), source=str(config_path))['run'])
    for section, key, value in overrides:
        if section != 'run':
            raise ConfigError(f"Override '{section}.{key}' has no effect on this command")
        if key not in config.run_field_names():
            raise ConfigError(f"unknown field '{key}' in section 'run'")
        run[key] = value
    try:
        return config.get_run_config(**run), run
    except ValueError as e:
        raise ConfigError(f"section 'run': {e}") from None
