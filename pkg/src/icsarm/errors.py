"""Exception hierarchy shared by all icsarm modules."""


class IcsArmError(Exception):
    """Base class for every error raised by the toolkit."""


class SchemaError(IcsArmError):
    """A dataset does not match its declared attribute schema."""


class ParseError(IcsArmError):
    """A value or line could not be parsed."""


class OrderingError(IcsArmError):
    """Timestamps are not strictly increasing (or violate the cadence)."""


class EncodingError(IcsArmError):
    """A raw actuator value has no entry in the configured encoding."""


class ConfigurationError(IcsArmError):
    """Invalid or inconsistent configuration."""


class NumericError(IcsArmError):
    """A non-finite value reached a numeric transform."""


class CapacityError(IcsArmError):
    """Input exceeds the capacity guard of an exhaustive routine."""


class RuleParseError(ParseError):
    """Malformed attack-rule text."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at column {position})")
        self.position = position


class ConsistencyError(IcsArmError):
    """Itemsets handed to rule derivation are not closed under subsets."""


class LaunchError(IcsArmError):
    """An attack script cannot be launched because an interlock blocks it."""


class ScheduleError(IcsArmError):
    """Attack scripts overlap in time or have an invalid window."""
