import pytest

from conftest import make_target
from fuzzsched import suites
from fuzzsched.coverage import Branch
from fuzzsched.errors import ConfigError
from fuzzsched.runtime.target import Phase, ProbTable, load, loads

TEXT = """\
# two fuzzers, one gate
[blocks]
entry 0

[branches]
0 1
1 2
1 3

[probs]
0 default 0.5
0 1 2 0.01
1 default 0.25

[cycle_ms]
0 500
1 2000

[phases]
10 1 default 0.75

[corpus]
0:1
"""


@pytest.fixture
def target():
    return loads(TEXT, name="doc")


class TestFileFormat:
    def test_parses_sections(self, target):
        assert target.entries == (0,)
        assert target.branches == (Branch(0, 1), Branch(1, 2), Branch(1, 3))
        assert target.prob(0, Branch(1, 2), 1) == 0.01
        assert target.prob(0, Branch(1, 3), 1) == 0.5
        assert target.cycle_time(1) == 2000
        assert target.corpus == [(Branch(0, 1),)]

    def test_phase_replaces_table_from_switch_round(self, target):
        assert target.prob(1, Branch(1, 2), 9) == 0.25
        assert target.prob(1, Branch(1, 2), 10) == 0.75
        assert target.prob(0, Branch(1, 2), 10) == 0.01

    def test_round_trip(self, target, tmp_path):
        path = tmp_path / "t.txt"
        target.save(path)
        again = load(path)
        assert again.dumps() == target.dumps()
        for f in (0, 1):
            for t in (1, 10):
                for b in target.branches:
                    assert again.prob(f, b, t) == target.prob(f, b, t)

    @pytest.mark.parametrize("suite", ["breakthrough-1", "heterogeneous-0", "nonstationary-50"])
    def test_builtin_targets_round_trip(self, suite):
        t = suites.builtin(suite)
        again = loads(t.dumps(), name=t.name)
        assert again.branches == t.branches
        assert again.dumps() == t.dumps()

    @pytest.mark.parametrize(
        "text",
        [
            "[branches]\n0 1\n",  # no entry
            "[blocks]\nentry 0\n[branches]\n5 6\n",  # unreachable pred
            "[blocks]\nentry 0\n[branches]\n0 1\n[probs]\n0 default 1.5\n",
            "[blocks]\nentry 0\n[branches]\n0 1\n1 2\n2 1\n",  # cycle
            "[blocks]\nentry 0\n[nonsense]\n",
            "[blocks]\nentry 0\n[cycle_ms]\n0 -5\n",
            "[blocks]\nentry 0\n[branches]\n0 zz\n",
            "entry 0\n",
        ],
    )
    def test_invalid_targets_rejected(self, text):
        with pytest.raises(ConfigError):
            loads(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load(tmp_path / "nope.txt")


class TestSuites:
    def test_builtin_lookup(self):
        assert suites.builtin("example").name == "breakthrough"
        with pytest.raises(KeyError):
            suites.builtin("mystery-1")

    def test_breakthrough_suite_shape(self):
        targets = suites.breakthrough_suite()
        assert len(targets) == 3
        assert all(len(t.cycle_ms) == 5 for t in targets)
        assert len({t.dumps() for t in targets}) == 3

    def test_nonstationary_target_swaps_tables(self):
        t = suites.nonstationary_target(switch_round=20)
        gate = next(b for b in t.branches if t.prob(0, b, 1) == suites.STRONG.gate)
        assert t.prob(1, gate, 20) == suites.STRONG.gate
        assert t.prob(0, gate, 20) == suites.WEAK.gate

    def test_targets_are_reproducible(self):
        assert suites.heterogeneous_suite()[2].dumps() == suites.heterogeneous_suite()[2].dumps()

    def test_make_target_helper_validates(self):
        t = make_target([(0, 1)], {0: 0.5}, phases=[Phase(3, {0: ProbTable(1.0)})])
        assert t.prob(0, Branch(0, 1), 3) == 1.0
