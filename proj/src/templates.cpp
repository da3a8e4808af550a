#include "hpoloop/templates.hpp"

#include <cctype>

#include "hpoloop/errors.hpp"

namespace hpoloop {

const std::string_view kCreatorTemplate =
    R"(You are a task creation AI expert in machine learning that required to optimize the model's hyperparameter settings to accomplish the final objective. To achieve this, you need to check the previous hyperparameter tuning plan and completed tasks results. Based on this information, generate a new sub-task for the task execution agent that can solve the sub-task. Below is the basic information about the experimental settings:

{model_info}

{dataset_info}

Below are the hyper-parameters and corresponding candidates or values range that can be tuned for the task:

{hyperparameter_info}

To accomplish the task, you have access to the following tools:

Name: "LoadHistoricalTrainingLogs"
Description: "This tool is designed for easily loading and reviewing model training logs. It automatically accesses records of loss and accuracy metrics from different hyper-parameter settings."

Format your response as follows:

Objective: Define the final goal
Thought: Describe your reasoning process
Action: Specify the action to take; valid actions are 'Final Answer' or {tool_names}
Action Input: Input for the action
Observation: Outcome of the action
... (this Thought/Action/Action Input/Observation can repeat N times)
Thought: I now know the final answer
Final Answer: The proposed hyper-parameters for the task

Analyze the completed tasks and their outcomes. Propose a new task focused on unexplored hyperparameter spaces or optimization techniques to methodically reach the final objective. The task executor will adjust hyperparameters and run the training script. Ensure your proposed hyperparameters are distinct from those previously tested, and state your recommendation as the 'Final Answer'.

Objective: {optim_goal}
Thought: {agent_scratchpad})";

const std::string_view kExecutorTemplate =
    R"(You are the machine learning experimenter and asked to finish the given objective below. To accomplish the task, you have access to the following tools:

Name: "LoadConfigs"
Description: "Useful for when you need to loading the model training configs and read the content. The file contains the hyper-parameters that used to define the training details of the model."

Name: "WriteConfigs"
Description: "Useful for when you need to writing the changed configs into file. Input should be the hyper-parameters that you want to write into the file IN JSON FORMAT. And you should also keep the unchanged Hyperparameter into the file."

Name: "ExecutePythonFile"
Description: "Useful for when you need to execute the python file to training the model"

Name: "LoadTrainingLogs"
Description: "Useful for when you need to loading the model training logs and read the content. The file contains the training logs (loss, accuracy) generated by training."

Use the following format:

Task: the input task you must solve
Thought: you should always think about what to do
Action: the action to take, should be one of [{tool_names}]
Action Input: the input to the action
Observation: the result of the action
... (this Thought/Action/Action Input/Observation can repeat N times)
Thought: I now know the final answer
Final Answer: the final answer to the original input question

After finish the task, analyze the training logs to make a summary about this experiment, including the analysis of the training trajectory and final training results. Then provide your answer with Final Answer.

Task: {task_name}
Thought:{agent_scratchpad})";

namespace {

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values,
                            const std::set<std::string>& deferred) {
  std::string out;
  out.reserve(tmpl.size() * 2);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t j = i + 1;
      while (j < tmpl.size() && is_ident_char(tmpl[j])) ++j;
      if (j < tmpl.size() && tmpl[j] == '}' && j > i + 1) {
        const std::string name(tmpl.substr(i + 1, j - i - 1));
        if (deferred.contains(name)) {
          out.append(tmpl.substr(i, j - i + 1));
        } else {
          auto it = values.find(name);
          if (it == values.end()) throw TemplateError("unfilled placeholder {" + name + "}");
          if (it->second.empty()) throw TemplateError("empty value for placeholder {" + name + "}");
          out += it->second;
        }
        i = j + 1;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

}  // namespace hpoloop
