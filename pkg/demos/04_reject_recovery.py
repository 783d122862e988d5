"""
Rejecting a transaction
=======================

Undo restores the before-image of every field an operation wrote. Restoring
only touches fields the transaction still holds in Write, so it needs no
concurrency control of its own.
"""

from pathlib import Path

from fieldlock import TransactionManager, parse_adt

HERE = Path(__file__).resolve().parent

account = parse_adt((HERE / "data" / "account.adt").read_text())

mgr = TransactionManager("dynamic-av")
mgr.add_instance("alice", account, (100, "alice"))

# a reader of the owner field runs alongside the doomed transaction
reader = mgr.begin("Reader")
mover = mgr.begin("Mover")
mgr.run_operation(mover, "alice", "deposit", (50,))
mgr.run_operation(mover, "alice", "withdraw", (30,))
print("owner seen by Reader:", mgr.run_operation(reader, "alice", "getOwner"))
print("balance before reject:", mgr.instances["alice"]["balance"])

for rec in mgr.log["Mover"]:
    print(" ", rec.to_line())

calls = sum(mgr.monitors["alice"].calls_by_txn.values())
mgr.reject(mover, "changed my mind")
print("balance after reject: ", mgr.instances["alice"]["balance"])
print("monitor calls by reject:", sum(mgr.monitors["alice"].calls_by_txn.values()) - calls, "(releases only)")

mgr.commit(reader)
print("blocked events:", mgr.trace.count("block"))
