"""Run a shrunken experiment grid end to end and print the report.

Budgets are cut down so this finishes in well under a minute; the numbers are
therefore noisy, but the pipeline (plan, cells, manifest, report) is the real one.

    python3 demos/mini_grid.py [out_dir]
"""
import sys
import tempfile
from pathlib import Path

from softlimb.runner import load_plan, report, run_plan

SMALL = """
[ppo]
total_steps = 600
[ac]
episodes = 60
[plan]
repetitions = 2
baseline_episodes = 40
"""

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="softlimb-"))
out.mkdir(parents=True, exist_ok=True)
(out / "small.ini").write_text(SMALL)
parser, plan = load_plan(out / "small.ini", out / "runs")
manifest = run_plan(plan, parser)
print(f"{len(manifest.cells)} cells, failed: {manifest.failed or 'none'}")
comparison = report(plan.out_dir, plan=plan, alpha=0.01)
print((plan.out_dir / "report" / "table.csv").read_text())
for c in comparison.comparisons:
    print(f"{c.learner} vs {c.baseline} ({c.setting}): {c.learner_mean:.2f} vs {c.baseline_mean:.2f}, "
          f"p = {c.test.p:.2g}, significant after Holm: {c.reject}")
print(f"outputs under {out}")
