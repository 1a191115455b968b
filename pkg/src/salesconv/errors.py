"""Error taxonomy shared across the package.

Each error carries a short machine-readable ``code`` that the CLI and the
wire protocol surface verbatim.
"""

from __future__ import annotations


class SalesconvError(Exception):
    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


class ConfigurationError(SalesconvError):
    code = "configuration_error"


class DataError(SalesconvError):
    code = "data_error"


class DimensionError(SalesconvError):
    code = "dimension_error"


class ProviderUnavailableError(SalesconvError):
    code = "provider_unavailable"


class GraphError(SalesconvError):
    code = "graph_error"


class CycleDetectedError(GraphError):
    code = "cycle_detected"


class DanglingEdgeError(GraphError):
    code = "dangling_edge"


class NoTemplateError(GraphError):
    code = "no_template_reachable"


class NotFoundError(SalesconvError):
    code = "not_found"


class SessionClosedError(SalesconvError):
    code = "session_closed"


class ServiceUnavailableError(SalesconvError):
    code = "service_unavailable"


class FormatVersionError(SalesconvError):
    code = "format_version_error"
