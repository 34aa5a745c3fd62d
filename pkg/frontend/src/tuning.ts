/** Tuning panel state: edit bounds locally, let the server decide.
 *
 * The draft never becomes the active config on this side. Acceptance
 * comes back with the canonical config and its hash; rejection comes
 * back with the reason, rendered verbatim. Both paths keep the
 * displayed hash equal to the server's.
 */

import type { ApiClient } from "./api.js";
import type {
  ConfigDoc,
  ConfigOut,
  ParamName,
  TuningVerdict,
} from "./types.js";
import { PARAM_NAMES } from "./types.js";

export interface TuningState {
  active: ConfigDoc;
  activeHash: string;
  meta: ConfigDoc;
  metaHash: string;
  draft: ConfigDoc;
  lastVerdict: TuningVerdict | null;
}

function cloneConfig(config: ConfigDoc): ConfigDoc {
  return JSON.parse(JSON.stringify(config)) as ConfigDoc;
}

export class TuningPanel {
  state: TuningState;

  constructor(
    private readonly api: ApiClient,
    initial: ConfigOut,
  ) {
    this.state = {
      active: initial.config,
      activeHash: initial.config_hash,
      meta: initial.meta,
      metaHash: initial.meta_hash,
      draft: cloneConfig(initial.config),
      lastVerdict: null,
    };
  }

  editBound(param: ParamName, side: "lower" | "upper", value: number): void {
    if (!Number.isFinite(value)) {
      throw new RangeError(`${param}.${side} must be a finite number`);
    }
    this.state.draft[param][side] = value;
  }

  rename(name: string): void {
    this.state.draft.name = name;
  }

  /** Submit the draft. Only an accepted verdict moves the active
   * config (and its hash) forward; a rejection leaves it untouched. */
  async propose(): Promise<TuningVerdict> {
    const verdict = await this.api.putConfig(this.state.draft);
    this.state.lastVerdict = verdict;
    if (verdict.accepted) {
      this.state.active = verdict.config;
      this.state.activeHash = verdict.config_hash;
      this.state.draft = cloneConfig(verdict.config);
    }
    return verdict;
  }

  /** Rejection text for the panel, exactly as the server put it. */
  rejectionLines(): string[] {
    const verdict = this.state.lastVerdict;
    if (!verdict || verdict.accepted) return [];
    return [
      verdict.detail,
      ...verdict.violations.map(
        (v) => `${v.parameter}.${v.side} exceeds the permitted range by ${v.excess}`,
      ),
    ];
  }

  /** Draft bounds that sit outside the outermost permitted bounds,
   * marked for highlighting. The server remains the authority; this
   * only decides which rows to tint after a rejection names them. */
  violatedParams(): Set<ParamName> {
    const verdict = this.state.lastVerdict;
    if (!verdict || verdict.accepted) return new Set();
    return new Set(verdict.violations.map((v) => v.parameter));
  }

  resetDraft(): void {
    this.state.draft = cloneConfig(this.state.active);
    this.state.lastVerdict = null;
  }
}

export { PARAM_NAMES };
