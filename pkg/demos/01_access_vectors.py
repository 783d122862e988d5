"""
Access vectors and strong commutativity
=======================================

Each operation of a tuple-based ADT gets one access mode per field. Two
operations commute when their modes are compatible field by field.
"""

from pathlib import Path

from fieldlock import control_vectors, format_vector, lemma1_holds, parse_adt, vectors_commute

HERE = Path(__file__).resolve().parent

account = parse_adt((HERE / "data" / "account.adt").read_text())

# the vectors come straight from the source text: an assignment means W
for op in account.operations.values():
    print(f"{op.name:<11} {format_vector(op.static_dav)}")

# deposit touches only the balance, getOwner only the owner
deposit, get_owner = account.operation("deposit"), account.operation("getOwner")
print("deposit / getOwner commute:", vectors_commute(deposit.static_dav, get_owner.static_dav))
print("deposit / deposit commute: ", vectors_commute(deposit.static_dav, deposit.static_dav))

# a bag of granted vectors is summarized by reader counts and writer counts
bag = [deposit.static_dav, get_owner.static_dav, get_owner.static_dav]
cv = control_vectors(bag)
print("rcv", cv.rcv, "wcv", cv.wcv, "admissible:", lemma1_holds(cv))

bag.append(account.operation("getBalance").static_dav)
cv = control_vectors(bag)
print("rcv", cv.rcv, "wcv", cv.wcv, "admissible:", lemma1_holds(cv))
