# %% [markdown]
# # Capabilities outliving a revocation
#
# A file server hands out capabilities: MACs over (user, operation) that the
# storage side accepts without consulting the policy again.  This walk-through
# builds one user's script, runs it by hand, and then lets the bounded checker
# find the schedule where a revoked user still reads the file.

# %%
from dataclasses import replace

from capcheck.checker import check_safety
from capcheck.harness import Simulator, run, safety_view
from capcheck.library import revocation_scenario
from capcheck.scripts import script_text

sc = revocation_scenario("dynamic")
print("variant:", sc.variant)
print("script of user 1:")
for line in script_text(sc.script_of(1)):
    print("   ", line)

# %% [markdown]
# Every nondeterministic decision is a named choice.  Serving a request, a
# clock tick and visible script actions are all listed by the simulator.

# %%
sim = Simulator(sc)
state, _ = sim.initial()
print(sim.choices(state))

# %% [markdown]
# A schedule is a list of such choices.  Here the user acquires a capability,
# asks for its own revocation, the clock ticks (which is when administrative
# changes take effect) and the old capability is used anyway.

# %%
schedule = [
    "m serve auth 1 (read:f) 1.0",
    "m serve adm 1 (revoke:1:read:f) 1.1",
    "m tick",
    "m serve exec 1 (mac(tup(1,read:f),K_real)) 1.2",
]
trace = run(sc, schedule)
for event in safety_view(trace):
    print("   ", event)

# %% [markdown]
# The checker reaches the same conclusion on its own: it explores every
# schedule up to the depth bound and compares with the ideal server.

# %%
verdict = check_safety(sc, depth=8)
print(verdict.summary())
print("witness schedule:")
for label in verdict.witness:
    print("   ", label)

# %% [markdown]
# Stamping capabilities with the clock and letting them expire at the next
# tick closes the hole.

# %%
fixed = check_safety(replace(sc, variant="dynamic-plus"), depth=8)
print(fixed.summary())
