#!/usr/bin/env node
// Compile one Solidity file and emit runtime bytecode plus per-function
// byte runs derived from the source map.  Reads a JSON request on stdin:
//   {"sources": {"path": "content", ...}, "file": "Main.sol", "contract": "Main"}
// Writes the artifact JSON on stdout.  Exit 3 when solc cannot be
// resolved, 1 on any compile failure.

"use strict";

// resolve solc starting from the corpus directory (the process cwd),
// falling back to this script's own tree
let solc;
try {
  const resolved = require.resolve("solc", { paths: [process.cwd(), __dirname] });
  solc = require(resolved);
} catch (e) {
  process.stderr.write("cannot resolve solc package: " + e.message + "\n");
  process.exit(3);
}

function readStdin() {
  const chunks = [];
  return new Promise((resolve) => {
    process.stdin.on("data", (c) => chunks.push(c));
    process.stdin.on("end", () => resolve(Buffer.concat(chunks).toString("utf8")));
  });
}

function decodeSourceMap(map) {
  const out = [];
  let prev = { s: 0, l: 0, f: 0 };
  for (const entry of map.split(";")) {
    const parts = entry.split(":");
    const cur = {
      s: parts[0] !== undefined && parts[0] !== "" ? parseInt(parts[0], 10) : prev.s,
      l: parts[1] !== undefined && parts[1] !== "" ? parseInt(parts[1], 10) : prev.l,
      f: parts[2] !== undefined && parts[2] !== "" ? parseInt(parts[2], 10) : prev.f,
    };
    out.push(cur);
    prev = cur;
  }
  return out;
}

function instructionOffsets(code) {
  const offsets = [];
  let i = 0;
  while (i < code.length) {
    offsets.push(i);
    const op = code[i];
    i += 1;
    if (op >= 0x60 && op <= 0x7f) i += op - 0x5f;
  }
  return offsets;
}

function collectFunctions(node, fileId, scope, acc) {
  if (!node || typeof node !== "object") return;
  if (node.nodeType === "ContractDefinition") scope = node.name;
  if (node.nodeType === "FunctionDefinition" && node.kind === "function") {
    const [s, l, f] = node.src.split(":").map(Number);
    if (f === fileId) {
      acc.push({
        name: node.name,
        qualname: scope ? scope + "." + node.name : node.name,
        visibility: node.visibility,
        srcStart: s,
        srcLen: l,
      });
    }
  }
  for (const key of Object.keys(node)) {
    const v = node[key];
    if (Array.isArray(v)) v.forEach((c) => collectFunctions(c, fileId, scope, acc));
    else if (v && typeof v === "object") collectFunctions(v, fileId, scope, acc);
  }
}

function toRuns(hits, offsets, codeLen) {
  // hits: sorted instruction indices; convert to byte-offset runs
  const runs = [];
  let runStart = -1;
  let prevIdx = -2;
  for (const idx of hits) {
    if (idx !== prevIdx + 1) {
      if (runStart >= 0) runs.push([offsets[runStart], offsets[prevIdx + 1] !== undefined ? offsets[prevIdx + 1] : codeLen]);
      runStart = idx;
    }
    prevIdx = idx;
  }
  if (runStart >= 0) runs.push([offsets[runStart], offsets[prevIdx + 1] !== undefined ? offsets[prevIdx + 1] : codeLen]);
  return runs;
}

async function main() {
  const request = JSON.parse(await readStdin());
  const input = {
    language: "Solidity",
    sources: {},
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
  for (const [path, content] of Object.entries(request.sources)) {
    input.sources[path] = { content };
  }
  const output = JSON.parse(solc.compile(JSON.stringify(input)));
  const fatal = (output.errors || []).filter((e) => e.severity === "error");
  if (fatal.length) {
    process.stderr.write(fatal.map((e) => e.formattedMessage || e.message).join("\n"));
    process.exit(1);
  }
  const unit = output.contracts && output.contracts[request.file];
  const contract = unit && unit[request.contract];
  if (!contract) {
    process.stderr.write("contract " + request.contract + " not found in " + request.file + "\n");
    process.exit(1);
  }
  const deployed = contract.evm.deployedBytecode;
  const code = Buffer.from(deployed.object, "hex");
  const offsets = instructionOffsets(code);
  const entries = decodeSourceMap(deployed.sourceMap);
  const mapped = Math.min(offsets.length, entries.length);

  // file path -> numeric id used by source maps
  const fileIds = {};
  for (const [path, src] of Object.entries(output.sources)) fileIds[path] = src.id;

  const functions = [];
  for (const [path, src] of Object.entries(output.sources)) {
    const acc = [];
    collectFunctions(src.ast, fileIds[path], null, acc);
    for (const fn of acc) {
      const hits = [];
      for (let i = 0; i < mapped; i++) {
        const e = entries[i];
        if (e.f === fileIds[path] && e.s >= fn.srcStart && e.s < fn.srcStart + fn.srcLen) hits.push(i);
      }
      if (!hits.length) continue;
      functions.push({
        name: fn.name,
        qualname: fn.qualname,
        visibility: fn.visibility,
        source: path,
        instr_count: hits.length,
        runs: toRuns(hits, offsets, offsets[mapped] !== undefined ? offsets[mapped] : code.length),
      });
    }
  }

  process.stdout.write(
    JSON.stringify({
      contract: request.contract,
      file: request.file,
      runtime: deployed.object,
      selectors: contract.evm.methodIdentifiers || {},
      code_len_mapped: mapped,
      functions,
    })
  );
}

main().catch((e) => {
  process.stderr.write(String(e && e.stack ? e.stack : e) + "\n");
  process.exit(1);
});
