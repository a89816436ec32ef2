"""MQTT topic names and filter matching (3.1.1 rules, `+` and `#`)."""

from __future__ import annotations


def topic_valid(topic: str) -> bool:
    """Publishable topic: non-empty, no wildcards, no NUL, fits a u16 length."""
    return (
        0 < len(topic.encode("utf-8")) <= 65535
        and "+" not in topic
        and "#" not in topic
        and "\x00" not in topic
    )


def filter_valid(filt: str) -> bool:
    """Subscription filter: `+` alone in its level, `#` alone in the last."""
    if not 0 < len(filt.encode("utf-8")) <= 65535 or "\x00" in filt:
        return False
    levels = filt.split("/")
    for i, level in enumerate(levels):
        if "#" in level:
            if level != "#" or i != len(levels) - 1:
                return False
        if "+" in level and level != "+":
            return False
    return True


def topic_matches(filt: str, topic: str) -> bool:
    """Does a topic name match a subscription filter?

    `+` matches exactly one level (possibly empty); `#` matches any remainder
    including the parent level itself. Filters starting with a wildcard never
    match $-prefixed topics.
    """
    if filt[:1] in ("+", "#") and topic.startswith("$"):
        return False
    flevels = filt.split("/")
    tlevels = topic.split("/")
    for i, flevel in enumerate(flevels):
        if flevel == "#":
            return True
        if i >= len(tlevels):
            return False
        if flevel == "+":
            continue
        if flevel != tlevels[i]:
            return False
    return len(tlevels) == len(flevels)


def device_topic(device_id: str, channel: str) -> str:
    return f"piheart/{device_id}/{channel}"
