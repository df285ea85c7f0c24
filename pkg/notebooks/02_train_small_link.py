# %% [markdown]
# # Learning a waveform on a small link
#
# End-to-end training of transmit filter, receive filter, constellation and
# detector under the ACLR and envelope-variance constraints.  The link is
# deliberately small (N = 128, S = 12, D = 8T) so the script finishes in a
# couple of minutes on one core.

# %%
import numpy as np

from wavelearn import baseline as bl
from wavelearn import constellation as cst
from wavelearn.config import DetectorSettings, LinkConfig, RunConfig, TrainConfig
from wavelearn.report import evaluate_rate
from wavelearn.trainer import Trainer

cfg = RunConfig(
    link=LinkConfig(block_length_N=128, half_size_S=12, duration_D_over_T=8, bits_per_symbol_K=2, snr_db=10),
    train=TrainConfig(eps_A=1e-3, eps_V=1.0, inner_steps=150, outer_iters=8),
    detector=DetectorSettings(features_F=32),
)

# %% [markdown]
# The initial point is the windowed RRC pair and Gray QPSK, so the first
# outer iterations mainly pull the ACLR down to its target.

# %%
tr = Trainer(cfg, progress=print)
print(f"initial ACLR {10 * np.log10(tr.model.aclr(tr.state.params)):.2f} dB, "
      f"V {tr.model.ped_variance(tr.state.params):.3f}")
tr.run()

# %% [markdown]
# ## Outcome vs. the baseline at the same SNR

# %%
rate, se = evaluate_rate(tr.model, tr.state.params, tr.state.streams["eval"], 50)
base = bl.baseline_rate(bl.RrcSpec(0.0, 8.0), cst.gray_qam(2), cfg.link.N0, 50, 128, np.random.default_rng(1))
last = tr.state.history[-1]
print(f"learned:  rate {rate:.3f} ± {se:.3f}, ACLR {last['aclr_db']:.2f} dB, V {last['V']:.3f}")
print(f"baseline: rate {base.rate:.3f} ± {base.stderr:.3f}, "
      f"ACLR {bl.baseline_link_quantities(bl.RrcSpec(0.0, 8.0)).aclr_db:.2f} dB")
print("learned constellation:", np.round(tr.state.params.constellation().points, 3))
