import json
import logging

import numpy as np
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import SimpleSpanProcessor
from opentelemetry.sdk.trace.export.in_memory_span_exporter import InMemorySpanExporter

from hybridqf import __version__
from hybridqf.logging_setup import configure_logging
from hybridqf.otel import traced


def test_json_logs_carry_numpy_extras(settings, capsys):
    configure_logging(settings)
    logging.getLogger("hybridqf.test").info(
        "Ensemble simulated", extra={"n_paths": np.int64(8), "times": np.array([0.5, 1.0]), "chi": np.complex128(1j)}
    )
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["message"] == "Ensemble simulated"
    assert record["level"] == "INFO"
    assert record["version"] == __version__
    assert record["n_paths"] == 8
    assert record["times"] == [0.5, 1.0]
    assert record["chi"] == {"re": 0.0, "im": 1.0}


def test_traced_cleans_attributes():
    exporter = InMemorySpanExporter()
    provider = TracerProvider()
    provider.add_span_processor(SimpleSpanProcessor(exporter))
    tracer = provider.get_tracer("hybridqf.test")

    with traced(tracer, "simulate", seed=None, n_paths=np.int64(4), record_times=np.array([0.5, 1.5])):
        pass

    (span,) = exporter.get_finished_spans()
    assert span.name == "simulate"
    assert "seed" not in span.attributes
    assert span.attributes["n_paths"] == 4
    assert tuple(span.attributes["record_times"]) == (0.5, 1.5)
