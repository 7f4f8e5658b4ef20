import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from flatcheck import CounterSystem, parse_dot

SYS_A_DOT = """
digraph a {
  s0 [props="p", init="true"];
  s0 -> s0 [update="c+=1"];
}
"""

SYS_B_DOT = """
digraph b {
  s0 [props="p", init="true"];
  s1 [props="q"];
  s0 -> s0;
  s0 -> s1;
  s1 -> s1;
}
"""


@pytest.fixture
def sys_a() -> CounterSystem:
    return parse_dot(SYS_A_DOT)


@pytest.fixture
def sys_b() -> CounterSystem:
    return parse_dot(SYS_B_DOT)
