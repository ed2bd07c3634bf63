"""Built-in class schedules and the schedule file loader.

Schedule files hold one integer class size per line; `#` starts a comment
and blank lines are ignored.
"""

import logging
from pathlib import Path

from campus_epi.classes import ClassSchedule
from campus_epi.errors import ScheduleParseError

logger = logging.getLogger(__name__)

PRESETS: dict[str, tuple[int, ...]] = {
    # 1000 students, 100 classes of 30
    "scenario1": (30,) * 100,
    # same seat total, a quarter of the classes twice the average size
    "scenario2": (60,) * 25 + (20,) * 75,
    # one class of each size 10..120: 7215 seats, 2405 students
    "range10to120": tuple(range(10, 121)),
}


def preset(name: str) -> ClassSchedule:
    return ClassSchedule(sizes=PRESETS[name], name=name)


def parse_schedule_text(text: str, source: str = "<schedule>") -> tuple[int, ...]:
    sizes = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            size = int(line)
        except ValueError:
            raise ScheduleParseError(f"{source}:{lineno}: expected an integer class size, got {line!r}") from None
        if size < 1:
            raise ScheduleParseError(f"{source}:{lineno}: class size must be positive, got {size}")
        sizes.append(size)
    if not sizes:
        raise ScheduleParseError(f"{source}: no class sizes found")
    return tuple(sizes)


def load_schedule(spec: str) -> ClassSchedule:
    """Resolve a preset name or a schedule file path."""
    if spec in PRESETS:
        return preset(spec)
    path = Path(spec)
    if not path.is_file():
        raise ScheduleParseError(f"unknown schedule '{spec}': not a preset ({', '.join(PRESETS)}) or a file")
    sizes = parse_schedule_text(path.read_text(encoding="utf-8"), source=str(path))
    logger.info(f"Loaded {len(sizes)} classes from {path}")
    return ClassSchedule(sizes=sizes, name=path.stem)
