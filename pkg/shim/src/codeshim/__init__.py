"""Single-shot runner for untrusted candidate programs.

One invocation executes one program: the protocol request arrives as a single
JSON line on stdin ({source, stdin_data, wall_clock_limit}) and the response
leaves as a single JSON line on stdout ({status, stdout, stderr, exit_code,
elapsed}).  The candidate runs in its own interpreter process, so a crash or
runaway loop can never corrupt the protocol framing.
"""

from codeshim.runner import CAPTURE_CAP, ShimResult, execute

__all__ = ["CAPTURE_CAP", "ShimResult", "execute"]
