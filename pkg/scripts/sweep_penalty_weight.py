import argparse
import logging
import os
from dataclasses import replace
from os import makedirs
from os.path import exists, join

import pandas as pd
import yaml
from dask.distributed import Client, LocalCluster
from tqdm import tqdm

from exogait.data import load_body_model, load_task, load_reference_gait
from exogait.gait import reference_trajectory
from exogait.optimizer import OptimizerOptions, penalty_sweep, select_penalty_weight, swing_cost_terms


def main():
    parser = argparse.ArgumentParser(description="Optimize gaits over a range of foot speed penalty weights")
    parser.add_argument("config", help="Sweep configuration yaml file")
    parser.add_argument("-p", "--proc", type=int, default=1, help="Number of processors")
    args = parser.parse_args()
    logging.basicConfig(level=os.environ.get("LOGLEVEL", "INFO"))
    logger = logging.getLogger(__name__)
    if not exists(args.config):
        raise FileNotFoundError(args.config + " not found.")
    with open(args.config) as config_file:
        config = yaml.load(config_file, Loader=yaml.FullLoader)
    if not exists(config["out_path"]):
        makedirs(config["out_path"])
    model = load_body_model(config["model"])
    options = OptimizerOptions(**config.get("optimizer", {}))
    ratio = config.get("speed_ratio", 1.5)
    client = None
    if args.proc > 1:
        cluster = LocalCluster(n_workers=0, threads_per_worker=1)
        cluster.scale(args.proc)
        client = Client(cluster)
        print(client)
    tables = []
    selection = {}
    for task_file in tqdm(config["tasks"]):
        # the sweep studies the penalty alone
        task = replace(load_task(task_file), max_foot_speed=None)
        table = penalty_sweep(task, model, config["penalty_weights"], options, client=client)
        reference_path = config.get("references", {}).get(task.name)
        if reference_path is not None:
            terms = swing_cost_terms(reference_trajectory(load_reference_gait(reference_path), task, model), task)
            table["reference_torque_term"] = terms["torque_term"]
            table["reference_peak_foot_speed"] = terms["peak_foot_speed"]
            table["torque_term_ratio"] = table["torque_term"] / terms["torque_term"]
            table["speed_ratio"] = table["peak_foot_speed"] / terms["peak_foot_speed"]
            selection[task.name] = select_penalty_weight(table, terms["peak_foot_speed"], ratio=ratio)
            logger.info("%s: smallest v_p within %g x reference peak foot speed: %s", task.name, ratio,
                        selection[task.name])
        tables.append(table)
    if client is not None:
        client.close()
    table = pd.concat(tables, ignore_index=True)
    table.to_csv(join(config["out_path"], config["out_file"]), index=False, float_format="%.17g")
    with open(join(config["out_path"], "selected_penalty_weights.yml"), "w") as out_file:
        yaml.dump(selection, out_file)
    print(table)
    return


if __name__ == "__main__":
    main()
