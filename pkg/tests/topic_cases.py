"""Topic-filter matching table shared by the codec tests and the acceptance
gate. (filter, topic, should_match) under MQTT 3.1.1 semantics."""

MATCHING_CASES = [
    ("sport/tennis/player1", "sport/tennis/player1", True),
    ("sport/tennis/player1", "sport/tennis/player2", False),
    ("sport/tennis/player1/#", "sport/tennis/player1", True),
    ("sport/tennis/player1/#", "sport/tennis/player1/ranking", True),
    ("sport/tennis/player1/#", "sport/tennis/player1/score/wimbledon", True),
    ("sport/#", "sport", True),
    ("sport/#", "sport/tennis/player1", True),
    ("#", "sport/tennis/player1", True),
    ("#", "sport", True),
    ("sport/tennis/#", "sport/tennis", True),
    ("sport/tennis#", "sport/tennis", False),  # invalid-ish filter never matches
    ("sport/tennis/+", "sport/tennis/player1", True),
    ("sport/tennis/+", "sport/tennis/player1/ranking", False),
    ("sport/+", "sport", False),
    ("sport/+", "sport/", True),
    ("+", "sport", True),
    ("+", "sport/tennis", False),
    ("+/tennis/#", "sport/tennis/player1", True),
    ("+/+", "sport/", True),
    ("/+", "/finance", True),
    ("+", "/finance", False),
    ("#", "$SYS/broker/load", False),
    ("+/monitor/Clients", "$SYS/monitor/Clients", False),
    ("$SYS/#", "$SYS/broker/load", True),
    ("piheart/+/hr", "piheart/dev1/hr", True),
    ("piheart/+/hr", "piheart/dev1/bvp", False),
]
