import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.EXTRA:
        terminalreporter.write_line(line)
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
