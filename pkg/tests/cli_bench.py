from tmonline.cli import bench


def bench_line():
    rep = bench(points=2000, repeats=3)
    line = (f"bench {rep['backend']} {rep['classes']}x{rep['clauses']} clauses, "
            f"F={rep['features']}: {rep['train_steps_per_s']:,.0f} train steps/s, "
            f"{rep['classifications_per_s']:,.0f} classifications/s")
    return line, rep
