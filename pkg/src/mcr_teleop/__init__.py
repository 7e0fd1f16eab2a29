"""Teleoperation stack for a mobile collaborative robot.

Subsystems are plain modules: geometry and kinematics primitives, the
whole-body controller (control), device-motion mapping (teleop), the
deterministic plant (simulator), pose-estimate modeling (vio), the wire
protocol and session machine (protocol, service), the assembled loop
(stack), scenario trials (harness), and the network service (server).
"""

__version__ = "0.1.0"
