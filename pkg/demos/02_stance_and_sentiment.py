"""Contrast target-aware stance with a target-blind lexicon score.

The sentence below praises one person while attacking another. A lexicon
score sees mixed words and lands near zero; stance asks about one keyword
at a time and gets a clear answer for each.

Run: python demos/02_stance_and_sentiment.py
"""

from newsbias.stance import (MockClassifier, RunReport, StanceCache, Verdict, aggregate_verdicts,
                             classify_sentence, lexicon_sentiment)

clf = MockClassifier()
cache = StanceCache()
report = RunReport()

sentences = [
    "Trump is doing a fantastic job.",
    "Critics say Biden gave a terrible answer, but Pelosi was strong.",
    "Biden made a terrible decision, unlike the brilliant critics.",
    "Biden is not great.",
    "The committee met on Tuesday.",
]
for s in sentences:
    for kw in ("Trump", "Biden", "Pelosi"):
        v = classify_sentence(s, kw, clf, cache, report)
        if v.verdict is not Verdict.NOT_MAIN_SUBJECT or kw in s:
            print(f"{kw:7s} {v.verdict.value:17s} {s}")
    print(f"{'':7s} lexicon {lexicon_sentiment(s):+.3f}")

# Repeating a question hits the cache instead of the classifier.
calls = clf.calls
classify_sentence(sentences[0], "Trump", clf, cache, report)
print(f"\nclassifier calls before/after repeat: {calls}/{clf.calls}; report: {report.to_json()}")

# Per-transcript stance is the mean over main-subject sentences only.
verdicts = [Verdict.POSITIVE, Verdict.POSITIVE, Verdict.NEGATIVE, Verdict.NOT_MAIN_SUBJECT]
print("stance of [POS, POS, NEG, NOT_MAIN]:", aggregate_verdicts(verdicts))
