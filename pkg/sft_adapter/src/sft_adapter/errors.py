"""Error taxonomy. Every domain failure carries a stable machine code."""


class AdapterError(Exception):
    code = "adapter_error"


class TokenCollision(AdapterError):
    """A special token is already present in the base vocabulary."""

    code = "token_collision"


class DataFormatError(AdapterError):
    """An SFT file line does not match the export format."""

    code = "data_format_error"


class ConfigError(AdapterError):
    """A config value is out of contract."""

    code = "config_error"
