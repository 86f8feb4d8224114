"""The two-robot evaluation fleet: a UR3 manipulator and a Unitree GO1 quadruped."""

from __future__ import annotations

from gestos.registry import CommandSchema, RobotProfile

UR3_COMMANDS = (
    ("manipulator_high_five", "Give a high five to the user"),
    ("manipulator_select_left_item", "Select item positioned to the left"),
    ("manipulator_select_right_item", "Select item positioned to the right"),
    ("manipulator_turn_object_around", "Rotate object to show all sides"),
    ("manipulator_close_gripper", "Grasp object"),
    ("manipulator_open_gripper", "Release object"),
)

GO1_COMMANDS = (
    ("robodog_give_paw", "Lift front leg to simulate a paw shake"),
    ("robodog_stand_up", "Rise on command when user gestures upward"),
    ("robodog_stand_down", "Sit or lie down"),
    ("robodog_come_closer", "Approach the user on beckoning gesture"),
    ("robodog_wagging_tail", "Simulate tail-wagging behavior"),
)

# row order of the published accuracy table
REFERENCE_COMMANDS = tuple((cmd, "ur3") for cmd, _ in UR3_COMMANDS) + tuple(
    (cmd, "go1") for cmd, _ in GO1_COMMANDS
)

PUBLISHED_ACCURACY = {
    "manipulator_high_five": 89,
    "manipulator_select_left_item": 98,
    "manipulator_select_right_item": 96,
    "manipulator_turn_object_around": 83,
    "manipulator_close_gripper": 72,
    "manipulator_open_gripper": 81,
    "robodog_give_paw": 95,
    "robodog_stand_up": 68,
    "robodog_stand_down": 96,
    "robodog_come_closer": 85,
    "robodog_wagging_tail": 61,
}


def ur3_profile(endpoint: str = "") -> RobotProfile:
    return RobotProfile(
        robot_id="ur3",
        description=(
            "Universal Robots UR3 tabletop manipulator: 6 degrees of freedom, two-finger "
            "gripper, fixed base, reaches items on the work surface in front of the user."
        ),
        commands=tuple(CommandSchema(c, d) for c, d in UR3_COMMANDS),
        endpoint=endpoint,
        capacity=1,
    )


def go1_profile(endpoint: str = "") -> RobotProfile:
    return RobotProfile(
        robot_id="go1",
        description=(
            "Unitree GO1 quadruped ('robodog'): 12 actuated joints, legged mobility, "
            "onboard cameras, performs social and locomotion behaviors near the user."
        ),
        commands=tuple(CommandSchema(c, d) for c, d in GO1_COMMANDS),
        endpoint=endpoint,
        capacity=1,
    )


def reference_fleet(endpoints: dict[str, str] | None = None) -> list[RobotProfile]:
    endpoints = endpoints or {}
    return [ur3_profile(endpoints.get("ur3", "")), go1_profile(endpoints.get("go1", ""))]
