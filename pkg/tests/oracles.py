"""Independent reference implementations used only to check the real ones.

These deliberately use different algorithms from the production code:
union-find instead of a linear sweep for call clustering, a fixpoint loop
instead of BFS for reachability, and a plain backtracking nested-loop
matcher (no planner, no indexes, atoms in written order) for query
evaluation.
"""

from datetime import timedelta


def cluster_witnesses_oracle(sightings, window_days):
    """Cluster (date, port_key) sightings of ONE vessel via union-find.

    Two sightings join the same cluster iff same port, gap <= window and no
    other-port sighting strictly between them.
    """
    items = sorted(sightings)
    n = len(items)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        parent[find(i)] = find(j)

    window = timedelta(days=window_days)
    for i in range(n):
        for j in range(i + 1, n):
            if items[i][1] != items[j][1]:
                continue
            if items[j][0] - items[i][0] > window:
                continue
            between = any(
                items[k][1] != items[i][1]
                and items[i][0] <= items[k][0] <= items[j][0]
                for k in range(n)
            )
            if not between:
                union(i, j)
    clusters = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(items[i])
    out = []
    for members in clusters.values():
        dates = [m[0] for m in members]
        out.append((members[0][1], min(dates), max(dates), len(members)))
    out.sort(key=lambda c: (c[1], c[0]))
    return out


def reachable_oracle(edges, start):
    """Fixpoint reachability over a direct-edge list, excluding the start."""
    reached = set()
    changed = True
    frontier = {start}
    while changed:
        changed = False
        new = set()
        for a, b in edges:
            if a in frontier or a in reached:
                if b not in reached and b != start:
                    new.add(b)
        if new - reached:
            reached |= new
            changed = True
        frontier = new
    return reached


def _parent_walk(taxonomy, concept):
    chain = []
    cursor = taxonomy.resolve(concept)
    while cursor is not None:
        chain.append(cursor)
        cursor = taxonomy.parent(cursor)
    return chain


def _role_extension(graph, role_name):
    """All (s, o) pairs of a role; transitive roles expand to their closure,
    alias roles restrict the base closure to their endpoint concepts."""
    role = graph.resolve_role(role_name)
    base = graph.base_role(role).name
    direct = list(graph.role_pairs(base))
    if role.transitive:
        pairs = set()
        for source in {s for s, _ in direct}:
            for target in reachable_oracle(direct, source):
                pairs.add((source, target))
    else:
        pairs = set(direct)
    if role.alias_of is not None:
        tax = graph.taxonomy
        pairs = {
            (s, o)
            for s, o in pairs
            if role.domain in _parent_walk(tax, graph.concept_of(s))
            and role.range in _parent_walk(tax, graph.concept_of(o))
        }
    return sorted(pairs)


def oracle_evaluate(query, graph):
    """Brute-force evaluation: atoms in written order, full-extension scans,
    backtracking consistency, binds and filters applied on complete rows.
    Returns sorted projected tuples, mirroring ResultSet.rows."""
    from datetime import date as _date

    from cargokg.queries import Const, SubclassAtom, TypeAtom

    tax = graph.taxonomy

    def candidates(atom):
        if isinstance(atom, TypeAtom):
            out = []
            for node in sorted(graph.individuals):
                for concept in _parent_walk(tax, graph.concept_of(node)):
                    out.append((node, concept))
            return out
        if isinstance(atom, SubclassAtom):
            out = []
            for concept in tax.concepts():
                for ancestor in _parent_walk(tax, concept):
                    out.append((concept, ancestor))
            return out
        return _role_extension(graph, atom.role)

    def terms(atom):
        if isinstance(atom, TypeAtom):
            return atom.subject, atom.concept
        if isinstance(atom, SubclassAtom):
            return atom.child, atom.ancestor
        return atom.subject, atom.object

    def resolve_const(term, position):
        # concepts resolve by name; individuals must exist verbatim
        if position == "concept":
            resolved = tax.resolve(term.name)
            return resolved if resolved is not None else "\x00missing"
        return term.name if term.name in graph.individuals else "\x00missing"

    rows = [{}]
    for atom in query.atoms:
        left, right = terms(atom)
        positions = (
            ("individual", "concept")
            if isinstance(atom, TypeAtom)
            else ("concept", "concept")
            if isinstance(atom, SubclassAtom)
            else ("individual", "individual")
        )
        extension = candidates(atom)
        new_rows = []
        for row in rows:
            for a, b in extension:
                binding = dict(row)
                ok = True
                for term, value, position in ((left, a, positions[0]), (right, b, positions[1])):
                    if isinstance(term, Const):
                        if resolve_const(term, position) != value:
                            ok = False
                            break
                    else:
                        if term.name in binding:
                            if binding[term.name] != value:
                                ok = False
                                break
                        else:
                            binding[term.name] = value
                if ok:
                    new_rows.append(binding)
        rows = new_rows
        if not rows:
            break

    complete = []
    for row in rows:
        full = dict(row)
        ok = True
        for bind in query.binds:
            text = graph.literal_form(full[bind.source])
            full[bind.target] = text[bind.start - 1 : bind.start - 1 + bind.length]
        for flt in query.filters:
            try:
                lhs = _date.fromisoformat(graph.literal_form(full[flt.lhs]))
                rhs = _date.fromisoformat(graph.literal_form(full[flt.rhs]))
            except ValueError:
                ok = False
                break
            keep = {
                "<": lhs < rhs,
                ">": lhs > rhs,
                "<=": lhs <= rhs,
                ">=": lhs >= rhs,
                "=": lhs == rhs,
            }[flt.op]
            if not keep:
                ok = False
                break
        if ok:
            complete.append(full)

    projected = [tuple(r[name] for name in query.projection) for r in complete]
    if query.distinct:
        projected = sorted(set(projected))
    else:
        projected.sort()
    return projected


def pair_trips_oracle(events):
    """Trips = (departure, next arrival) pairs, from an explicit index scan."""
    trips = []
    for i, e in enumerate(events):
        if e.kind.value != "Departure":
            continue
        for later in events[i + 1 :]:
            if later.kind.value == "Arrival":
                trips.append((e.event_id, later.event_id))
                break
    # a departure whose next non-arrival... pairing greedily consumes: filter
    # overlapping pairs (each arrival used once)
    used = set()
    out = []
    for dep, arr in trips:
        if arr in used:
            continue
        used.add(arr)
        out.append((dep, arr))
    return out
