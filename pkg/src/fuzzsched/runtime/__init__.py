from fuzzsched.runtime.base import CycleResult, Fuzzer, FuzzerStatus, Outcome, Watchdog
from fuzzsched.runtime.external import ExternalFuzzer, python_adapter_command
from fuzzsched.runtime.simulated import LocalCoverage, SimulatedFuzzer, sim_one_cycle
from fuzzsched.runtime.target import Phase, ProbTable, SyntheticTarget

__all__ = [
    "CycleResult",
    "ExternalFuzzer",
    "Fuzzer",
    "FuzzerStatus",
    "LocalCoverage",
    "Outcome",
    "Phase",
    "ProbTable",
    "SimulatedFuzzer",
    "SyntheticTarget",
    "Watchdog",
    "python_adapter_command",
    "sim_one_cycle",
]
