"""
Reading data
============

LIBSVM sparse text and comma-separated tables both become a Dataset, which
can be standardized before building a problem.
"""

from shufflelab.data import parse_csv, parse_libsvm, serialize_libsvm, standardize
from shufflelab.errors import ParseError
from shufflelab import make_problem

text = """# two classes, labels 1/2
2 1:0.5 3:2.0
1 2:1.0
2 1:1.5 2:0.25
1 3:-1.0
"""
ds = parse_libsvm(text)
print("rows", ds.n, "features", ds.d_in, "labels", ds.labels)
print(ds.dense_features())
print("serialized back:\n" + serialize_libsvm(ds))

z = standardize(ds)
print("standardized column means:", z.features.mean(axis=0).round(12))
print("standardized column variances:", z.features.var(axis=0))

table = parse_csv("x,y,target\n1,2,3.5\n4,5,0.5\n7,1,2.0\n", label_column="target")
print("\ncsv features:\n", table.features, "\nlabels:", table.labels)
print("linear regression on it, n =", make_problem("linreg", table).n)

try:
    parse_libsvm("+1 2:1 1:3\n")
except ParseError as exc:
    print("\nparse error:", exc)
