# resources/stopwords.py
"""
Default English stop-word list for document featurization

A fixed list keeps vocabularies reproducible across machines and library
versions. Contractions are stored split the way the tokenizer splits them
("don't" -> "don", "t"); one-letter pieces never survive tokenization, so
only the longer halves are listed.

Override with a user file (one word per line, '#' comments) through
utils.dataio.load_stopwords / the CLI --stopwords flag.
"""

DEFAULT_STOPWORDS = frozenset("""
a about above after again against ain all am an and any are aren as at
be because been before being below between both but by
can couldn could
d did didn do does doesn doing don down during
each
few for from further
had hadn has hasn have haven having he her here hers herself him himself his how
i if in into is isn it its itself
just
ll
ma me mightn more most mustn my myself
needn no nor not now
o of off on once only or other our ours ourselves out over own
re
s same shan she should shouldn so some such
t than that the their theirs them themselves then there these they this those through to too
under until up
ve very
was wasn we were weren what when where which while who whom why will with won wouldn
y you your yours yourself yourselves
also however may might must shall would upon whose within without
""".split())
