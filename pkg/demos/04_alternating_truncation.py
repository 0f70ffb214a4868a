"""Heavy-tailed degrees: matching in stages with growing caps."""
from stubmatch import (SimParams, Window, Zipf, alternating_truncation, choose_truncations,
                       match_report, sample_config)

law = Zipf(2.0)
caps = choose_truncations(law, law, 1.0, 1.0, stages=4)
print("caps:", caps)

cfg = sample_config(SimParams(Window(2, 40.0), 1.0, 1.0, law, law, seed=3))
res = alternating_truncation(cfg, caps)
for stage in res.stages:
    print(f"stage {stage.stage}: caps ({stage.cap_red}, {stage.cap_blue}), designated {stage.designated_color}, "
          f"saturated {stage.saturated_color}, +{stage.edges_added} edges, "
          f"leftover {stage.leftover_fraction:.4f}")
print(match_report(cfg, res.matching))
