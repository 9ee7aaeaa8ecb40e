"""Exception hierarchy shared by every mockcheck module."""


class MockcheckError(Exception):
    """Base class for all errors raised by mockcheck."""


class ParseError(MockcheckError, ValueError):
    """A document or CSV file could not be parsed."""


class ContractError(MockcheckError, ValueError):
    """A caller violated a precondition or a cross-field invariant."""


class ShapeError(ContractError):
    """Layer or tensor shapes do not compose."""
