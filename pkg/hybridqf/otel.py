from contextlib import contextmanager
from typing import Any, Iterator, Optional

import numpy as np
from opentelemetry import trace
from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import OTLPSpanExporter
from opentelemetry.instrumentation.logging import LoggingInstrumentor
from opentelemetry.sdk.resources import Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor
from opentelemetry.trace import TracerProvider as TracerProviderType

from hybridqf import __version__
from hybridqf.settings import Settings


def configure_tracing(settings: Settings) -> Optional[TracerProviderType]:
    """Configure OpenTelemetry tracing when an OTLP endpoint is provided.

    Trace ids are injected into log records either way.
    """

    instrumentor = LoggingInstrumentor()
    if not instrumentor.is_instrumented_by_opentelemetry:
        instrumentor.instrument(set_logging_format=False)
    if not settings.otlp_endpoint:
        return None

    resource = Resource.create({"service.name": settings.otel_service_name, "service.version": __version__})
    tracer_provider = TracerProvider(resource=resource)
    span_exporter = OTLPSpanExporter(endpoint=settings.otlp_endpoint, insecure=settings.otlp_insecure)
    tracer_provider.add_span_processor(BatchSpanProcessor(span_exporter))

    trace.set_tracer_provider(tracer_provider)
    return tracer_provider


def get_tracer(name: str) -> trace.Tracer:
    """Tracer for ``name``; a no-op tracer unless :func:`configure_tracing` installed a provider."""

    return trace.get_tracer(name)


def _attribute(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (list, tuple, np.ndarray)):
        return [float(v) for v in np.asarray(value, dtype=float).ravel()]
    return value


@contextmanager
def traced(tracer: trace.Tracer, name: str, **attributes: Any) -> Iterator[trace.Span]:
    """Span with numpy values converted and ``None`` attributes dropped."""

    clean = {key: _attribute(value) for key, value in attributes.items() if value is not None}
    with tracer.start_as_current_span(name, attributes=clean) as span:
        yield span
