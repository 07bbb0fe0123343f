"""
Attack drills
=============

Run the four scripted attack scenarios against fresh networks and print
their reports. Each drill first replays the same traffic with no fault
injected to prove the detectors stay quiet, then injects the attack and
checks detection, response, recovery, and the audit trail on-chain.

The exit status is nonzero if any verdict fails, so this doubles as a
smoke check in CI.
"""

import sys

from fakturchain.scenarios import RUNNERS

failed = []
for name, runner in RUNNERS.items():
    print(f"=== {name} " + "=" * (60 - len(name)))
    report = runner()
    print(report.summary())
    print()
    if not report.verdict.ok:
        failed.append(name)

if failed:
    print(f"FAILED drills: {', '.join(failed)}")
    sys.exit(1)
print("all drills passed")
