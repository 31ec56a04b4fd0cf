import numpy as np
import pytest

from maskrepair.config import PipelineConfig
from maskrepair.organ_rules import compile_plan
from maskrepair.schema import OrganSchema, OrganSpec, reference_schema


@pytest.fixture(scope="session")
def schema():
    return reference_schema()


@pytest.fixture(scope="session")
def config():
    return PipelineConfig()


@pytest.fixture(scope="session")
def plan(schema, config):
    return compile_plan(schema, config)


@pytest.fixture(scope="session")
def small_schema():
    return OrganSchema((
        OrganSpec("liver", 1, keep_top=1, min_component_voxels=5),
        OrganSpec("lung", paired=True, pair_sides=(2, 3), keep_top=2, min_component_voxels=5),
        OrganSpec("colon", 4, keep_top=None, min_component_voxels=5, mergeable=True,
                  adjacency=("intestine",)),
        OrganSpec("intestine", 5, keep_top=None, min_component_voxels=5, mergeable=True,
                  adjacency=("colon",)),
    ))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one PASS/FAIL line per acceptance criterion, printed with or without -s
_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    number, title = marker.args
    detail = getattr(item, "criterion_detail", "")
    status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
    _criteria[number] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status, detail = _criteria[number]
        line = f"criterion {number:>2} {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def record(request):
    """Attach a short measurement to the criterion line of the running test."""
    def _record(text):
        request.node.criterion_detail = text
        print(text)
    return _record
