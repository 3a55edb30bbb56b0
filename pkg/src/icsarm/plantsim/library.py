"""Two dozen reference attack rules with the prefixes needed to launch them.

Durations are the originals' (three minutes where none was recorded); the
scripts are re-timed into slots ``SLOT`` seconds apart so that each one's
cooldown and manual hold are over before the next begins.
"""

from __future__ import annotations

from ..rulegen import parse_items, parse_rule
from .attack import AttackScript

SLOT = 1800
FIRST_START = 600
DEFAULT_DURATION = 180

# (rule, prefix, duration in seconds or None)
REFERENCE_RULES = (
    ("MV101=Close, MV303=Close, MV304=Open, P302=Off --> P205=Off", "", 420),
    ("P203=Off, MV101=Close, P602=Off, FIT201<0.5 --> FIT601<0.5", "", None),
    ("FIT101>0.5, MV304=Close, P101=Off, P302=On --> MV303=Close", "MV302=Open", 300),
    ("FIT101>0.5, MV201=Close, MV302=Open, MV303=Close, P302=Off --> MV101=Open", "", 420),
    ("P302=Off, MV101=Close, MV304=Close, FIT201<0.5 --> P602=Off", "", None),
    ("P205=On, P302=Off, MV301=Close --> P203=On", "MV201=Open, P101=On", 240),
    ("P101=Off, FIT201<0.5, P205=Off, FIT301<0.5, MV302=Open --> MV101=Open", "", 240),
    ("MV302=Close, MV101=Open, MV303=Close, P205=On --> P602=Off", "MV201=Open, P101=On", 120),
    ("MV101=Open, MV201=Close, MV302=Open, MV303=Close, P302=Off --> FIT101>0.5", "", 120),
    ("P203=Off, MV101=Close, MV303=Close, FIT301<0.5 --> FIT201<0.5", "", None),
    (
        "P101=Off, FIT201<0.5, MV201=Close, P203=Off, P205=Off, FIT301<0.5, MV301=Close, "
        "MV302=Open, FIT601<0.5 --> P302=Off",
        "",
        180,
    ),
    ("FIT101>0.5, P101=Off, MV201=Open, MV301=Close, MV304=Close, P302=On --> FIT301>0.5", "MV302=Open", 180),
    ("MV201=Close, MV302=Close, MV101=Close, MV301=Close --> P203=Off", "", 120),
    ("MV302=Open, P205=Off, FIT301<0.5 --> P203=Off", "", 120),
    ("MV302=Close, P602=Off, P205=On, MV301=Close --> P203=On", "MV201=Open, P101=On", 180),
    ("MV201=Close, MV302=Open, FIT301<0.5, FIT601<0.5 --> P203=Off", "", 180),
    ("MV201=Open, MV304=Close, P101=Off, FIT201<0.5 --> MV301=Close", "", 180),
    ("MV303=Open, MV101=Open, FIT301<0.5, FIT201>0.5 --> MV302=Close", "", 180),
    ("MV302=Close, FIT301<0.5, MV301=Open, FIT201>0.5 --> MV201=Open", "", 180),
    ("MV201=Open, P205=On, MV301=Close, P302=Off, FIT601<0.5, P602=Off --> P203=On", "P101=On", 180),
    ("FIT201>0.5, P205=On, MV302=Close, P302=Off, FIT601<0.5 --> P203=On", "MV201=Open, P101=On", 180),
    ("FIT101>0.5, MV101=Open, MV301=Open, FIT201>0.5 --> MV201=Open", "", 180),
    ("MV201=Open, FIT601<0.5, MV303=Close, P205=On --> P602=Off", "P101=On", 180),
    (
        "FIT201>0.5, P205=On, FIT301<0.5, MV302=Close, MV304=Close, FIT601<0.5 --> P203=On",
        "MV201=Open, P101=On",
        180,
    ),
)

OVERFLOW_RULE = REFERENCE_RULES[3][0]


def reference_scripts(slot: int = SLOT, first_start: int = FIRST_START) -> list[AttackScript]:
    scripts = []
    for k, (rule, prefix, duration) in enumerate(REFERENCE_RULES):
        start = first_start + k * slot
        scripts.append(
            AttackScript(
                parse_rule(rule),
                tuple(parse_items(prefix)) if prefix else (),
                start,
                start + (duration or DEFAULT_DURATION),
            )
        )
    return scripts
