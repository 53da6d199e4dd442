# %% [markdown]
# # What a capability reveals
#
# Even when every capability is checked correctly, their shape can leak the
# access policy to someone watching the network.  Three design choices are
# compared here by asking whether two systems, identical from the ideal
# server's point of view, can be told apart.

# %%
from capcheck import core
from capcheck.library import CASES, run_case

for name in ("fake-cap-leak", "cap-compare-leak", "t6-t7"):
    case = CASES[name]()
    print(f"{name}: {case.description}")
    for which in ("broken", "fixed"):
        v = run_case(case, which)
        print(f"    {which:6} -> {v.kind}")

# %% [markdown]
# Denied requests still receive a capability, MAC'd under a second key the
# storage server rejects.  To an outsider both look alike until they are
# used.

# %%
policy = core.AccessPolicy.of([(1, "read:f")])
granted = core.cert(policy, 1, "read:f", 0)
denied = core.cert(policy, 2, "read:f", 0)
print(granted.text())
print(denied.text())
print("verify:", core.verif(granted), core.verif(denied))

# %% [markdown]
# The violation found for the broken configuration comes with a schedule
# and the observable trace that only one of the two systems can produce.

# %%
v = run_case(CASES["fake-cap-leak"](), "broken")
print("scenario:", v.witness_scenario.name)
for event in v.observable:
    print("   ", event)

# %% [markdown]
# With encrypted timestamps the clock is never visible in clear: the
# adversary sees opaque ciphertext tokens `enc#n` instead.

# %%
from capcheck.explore import explore

t6 = CASES["t6-t7"]().fixed.scenarios[0]
traces = explore(t6).traces
print(len(traces), "adversary traces; a long one:")
for event in max(traces, key=len):
    print("   ", event)
