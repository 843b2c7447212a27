#!/usr/bin/env node
// Compiles every fixture contract and freezes the artifacts under
// compiled/.  Each artifact carries the runtime bytecode, the selector
// table, and byte-offset ranges for every function recovered from the
// source map, so the Python tests never need a compiler.
//
// Usage: node build.js   (run from fixtures/ after `npm install`)

"use strict";

const fs = require("fs");
const path = require("path");
const solc = require("solc");

const CONTRACTS_DIR = path.join(__dirname, "contracts");
const LIB_DIR = path.join(CONTRACTS_DIR, "lib");
const OUT_DIR = path.join(__dirname, "compiled");

// target contract per fixture file
const TARGETS = {
  "dual_pool.sol": "DualPool",
  "dual_feed.sol": "DualFeed",
  "dual_reward.sol": "DualReward",
  "swap_unpatched.sol": "Swap",
  "swap_patched.sol": "Swap",
  "tokenhub.sol": "Tokenhub",
  "vault_chain.sol": "Vault",
  "lc_treasury.sol": "Treasury",
  "lc_crowdsale.sol": "Crowdsale",
  "lc_tokenmover.sol": "TokenMover",
  "lc_nftpayout.sol": "NftPayout",
  "lc_registry.sol": "Registry",
  "lc_config.sol": "Config",
  "cl_treasury_safe.sol": "TreasurySafe",
  "cl_crowdsale_safe.sol": "CrowdsaleSafe",
  "cl_tokenmover_safe.sol": "TokenMoverSafe",
  "cl_registry_safe.sol": "RegistrySafe",
  "cl_config_safe.sol": "ConfigSafe",
  "cl_single_pool.sol": "SinglePool",
  "cl_single_feed.sol": "SingleFeed",
  "cl_plain_token.sol": "PlainToken",
  "cl_counter.sol": "Counter",
  "db_swaputils.sol": "SwapUtilsExport",
  "db_metaswaputils.sol": "MetaSwapUtilsExport",
  "db_pricefeed_v1.sol": "PriceFeedV1Export",
  "db_pricefeed_v2.sol": "PriceFeedV2Export",
  "db_rewardmath_v1.sol": "RewardMathExport",
  "db_rewardmath_v2.sol": "RewardMathV2Export",
  "db_address.sol": "AddressExport",
  "db_safetransfer.sol": "SafeTransferExport",
  "db_ownable.sol": "OwnableExport",
  "db_merkleproof.sol": "MerkleProofExport",
  "db_erc20.sol": "ERC20",
};

function readSources() {
  const sources = {};
  for (const f of fs.readdirSync(LIB_DIR)) {
    if (f.endsWith(".sol")) {
      sources["lib/" + f] = { content: fs.readFileSync(path.join(LIB_DIR, f), "utf8") };
    }
  }
  return sources;
}

// one instruction per source-map entry; PUSH immediates are skipped
function instructionOffsets(code) {
  const offsets = [];
  let i = 0;
  while (i < code.length) {
    offsets.push(i);
    const op = code[i];
    let size = 1;
    if (op >= 0x60 && op <= 0x7f) size += op - 0x5f;
    i += size;
  }
  return offsets;
}

function decodeSourceMap(srcmap) {
  const entries = [];
  let s = 0, l = 0, f = 0;
  for (const part of srcmap.split(";")) {
    const fields = part.split(":");
    if (fields[0] !== undefined && fields[0] !== "") s = parseInt(fields[0], 10);
    if (fields[1] !== undefined && fields[1] !== "") l = parseInt(fields[1], 10);
    if (fields[2] !== undefined && fields[2] !== "") f = parseInt(fields[2], 10);
    entries.push({ s, l, f });
  }
  return entries;
}

function collectFunctions(ast, unit) {
  const out = [];
  function walk(node, scope) {
    if (!node || typeof node !== "object") return;
    if (node.nodeType === "ContractDefinition") scope = node.name;
    if (node.nodeType === "FunctionDefinition" && node.kind === "function") {
      const [s, l, f] = node.src.split(":").map(Number);
      out.push({
        name: node.name,
        qualname: scope + "." + node.name,
        visibility: node.visibility,
        src_start: s,
        src_len: l,
        src_file: f,
        unit: unit,
      });
    }
    for (const key of Object.keys(node)) {
      const v = node[key];
      if (Array.isArray(v)) v.forEach((c) => walk(c, scope));
      else if (v && typeof v === "object" && v.nodeType) walk(v, scope);
    }
  }
  walk(ast, null);
  return out;
}

// contiguous byte-offset runs covered by a set of instruction indices
function toRuns(indices, offsets, sizes) {
  const runs = [];
  let run = null;
  for (let k = 0; k < offsets.length; k++) {
    if (indices.has(k)) {
      const start = offsets[k];
      const end = start + sizes[k];
      if (run && run[1] === start) run[1] = end;
      else {
        if (run) runs.push(run);
        run = [start, end];
      }
    }
  }
  if (run) runs.push(run);
  return runs;
}

function build(file, contractName) {
  const sources = readSources();
  sources[file] = { content: fs.readFileSync(path.join(CONTRACTS_DIR, file), "utf8") };

  const input = {
    language: "Solidity",
    sources,
    settings: {
      optimizer: { enabled: false },
      outputSelection: {
        "*": {
          "*": ["evm.deployedBytecode.object", "evm.deployedBytecode.sourceMap", "evm.methodIdentifiers"],
          "": ["ast"],
        },
      },
    },
  };

  const output = JSON.parse(solc.compile(JSON.stringify(input)));
  const hardErrors = (output.errors || []).filter((e) => e.severity === "error");
  if (hardErrors.length) {
    for (const e of hardErrors) console.error(e.formattedMessage);
    throw new Error("compilation failed for " + file);
  }

  const artifact = output.contracts[file][contractName];
  const runtimeHex = artifact.evm.deployedBytecode.object;
  const srcmap = artifact.evm.deployedBytecode.sourceMap;
  const code = Buffer.from(runtimeHex, "hex");

  const fileIds = {};
  const fileById = {};
  for (const [p, meta] of Object.entries(output.sources)) {
    fileIds[p] = meta.id;
    fileById[meta.id] = p;
  }

  const offsets = instructionOffsets(code);
  const sizes = offsets.map((o, k) => (k + 1 < offsets.length ? offsets[k + 1] - o : code.length - o));
  const entries = decodeSourceMap(srcmap);
  // walked tail beyond the mapped instructions is the metadata blob
  const mapped = Math.min(offsets.length, entries.length);

  const functions = [];
  for (const [p, meta] of Object.entries(output.sources)) {
    for (const fn of collectFunctions(meta.ast, p)) {
      const hit = new Set();
      for (let k = 0; k < mapped; k++) {
        const e = entries[k];
        if (e.f === fileIds[fn.unit] && e.s >= fn.src_start && e.s < fn.src_start + fn.src_len) {
          hit.add(k);
        }
      }
      if (hit.size === 0) continue;
      const runs = toRuns(hit, offsets, sizes);
      runs.sort((a, b) => b[1] - b[0] - (a[1] - a[0]));
      functions.push({
        name: fn.name,
        qualname: fn.qualname,
        visibility: fn.visibility,
        source: fn.unit,
        instr_count: hit.size,
        runs: runs,
      });
    }
  }

  const selectors = artifact.evm.methodIdentifiers || {};
  return {
    file: file,
    contract: contractName,
    solc: solc.version(),
    runtime: runtimeHex,
    code_len_mapped: mapped < offsets.length ? offsets[mapped] : code.length,
    selectors: selectors,
    functions: functions,
  };
}

function main() {
  fs.mkdirSync(OUT_DIR, { recursive: true });
  const names = Object.keys(TARGETS).sort();
  for (const file of names) {
    const art = build(file, TARGETS[file]);
    const outPath = path.join(OUT_DIR, file.replace(/\.sol$/, ".json"));
    fs.writeFileSync(outPath, JSON.stringify(art, null, 1) + "\n");
    console.log(`${file} -> ${path.basename(outPath)} (${art.runtime.length / 2} bytes, ${art.functions.length} functions)`);
  }
}

main();
