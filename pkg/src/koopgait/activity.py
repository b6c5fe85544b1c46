"""The five activity labels shared by the classifier, the Koopman bank and
the simulator."""

ACTIVITY_NAMES = ("walking", "standing", "sitting", "standing_up", "sitting_down")

WALKING, STANDING, SITTING, STANDING_UP, SITTING_DOWN = range(5)

NUM_ACTIVITIES = len(ACTIVITY_NAMES)

_NAME_TO_ID = {name: i for i, name in enumerate(ACTIVITY_NAMES)}


def activity_id(name: str) -> int:
    try:
        return _NAME_TO_ID[name]
    except KeyError:
        raise ValueError(f"unknown activity {name!r}; expected one of {ACTIVITY_NAMES}") from None


def activity_name(label: int) -> str:
    if not 0 <= label < NUM_ACTIVITIES:
        raise ValueError(f"activity id {label} out of range")
    return ACTIVITY_NAMES[label]
