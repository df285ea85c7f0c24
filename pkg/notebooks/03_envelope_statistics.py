# %% [markdown]
# # Envelope statistics of pulse-shaped QAM
#
# The average PED variance `V` is a closed-form function of the transmit
# filter and constellation moments.  Here it is compared with a measured
# NPD distribution for the same signals.

# %%
import numpy as np

from wavelearn import baseline as bl
from wavelearn import constellation as cst
from wavelearn import envelope as env
from wavelearn.sinc_filter import FilterParams
from wavelearn.system import fourier_coeffs

# %% [markdown]
# Sinc-basis approximations of windowed RRC pulses with different
# roll-offs (S = 60, D = 16T).  Larger roll-off means faster decaying
# tails and therefore a steadier envelope.

# %%
D, S = 16.0, 60
rng = np.random.default_rng(3)
for beta in (0.0, 0.25, 0.5):
    theta = fourier_coeffs(lambda t: bl.baseline_filter(bl.RrcSpec(beta, D), t), S, D)
    for name, c in (("QPSK", cst.gray_qam(2)), ("16QAM", cst.gray_qam(4))):
        V = env.avg_ped_variance(theta, c, D)
        s = c.points[rng.integers(0, c.points.size, 4000)]
        t, x = env.render_signal(s, FilterParams(theta, D, "tx"), D)
        mask = env.steady_state_mask(t, s.size, D)
        thr, prob = env.npd_ccdf(x, mask, thresholds=[0.5, 1.0, 1.5])
        print(f"beta={beta:.2f} {name:5}  V={V:.3f}  P(NPD>0.5,1,1.5)={np.round(prob, 4)}  "
              f"PAPR={env.papr_db(x, mask):.2f} dB")
