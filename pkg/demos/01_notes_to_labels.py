"""Free-text schedule notes become availability signals and adjust the training labels.

Run: python demos/01_notes_to_labels.py
"""

import numpy as np

from ptosched import datasim, notelab

# %% The rule engine reads each note against two lexicons. Conflicts win over overtime.
for text in ["Vacation", "stayed late", "Can cover, but PTO in the afternoon",
             "thanks for the swap last week", "OR coverage all day"]:
    signal, why = notelab.classify_note(text)
    print(f"{text!r:42} -> signal={signal!s:5} ({why})")

# %% Several notes on one clinician-day resolve to a single signal.
cfg = datasim.SimConfig(months=((2024, 2), (2024, 3)))
corpus = datasim.simulate_corpus(cfg)
audit = notelab.AuditTrail()
classified = notelab.classify_notes(corpus.notes, audit)
resolved = notelab.resolve_all(classified)
counts = {0: 0, 1: 0}
for sig in resolved.values():
    counts[sig.signal] += 1
print(f"\n{len(corpus.notes)} notes, {len(audit.entries)} audit entries, "
      f"{len(resolved)} resolved cells: {counts[0]} conflicts, {counts[1]} confirmations")

# %% Fusion multiplies the structural label by the note signal, so a note can only remove availability.
md = corpus.month("2024-03")
lab = datasim.structural_labels(md.instance, md.template)
fused = lab.copy()
for (i, date), sig in resolved.items():
    if date[:7] == md.key:
        t = md.instance.horizon.index(date)
        fused[i, t] = notelab.fuse_labels(int(lab[i, t]), sig.signal)
duty = list(md.instance.duty_days)
print(f"March 2024: {int((lab[:, duty] == 1).sum())} scheduled clinician-days, "
      f"{int((fused[:, duty] == 1).sum())} after note fusion")
assert np.all(fused[:, duty] <= lab[:, duty])

# %% The audit trail keeps one JSON line per note.
print("\nfirst audit line:")
print(audit.to_jsonl().splitlines()[0])
